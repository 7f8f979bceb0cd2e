use lfpp::formats::*;
use lfpp_core::GridSpec;
use serde_json::json;

fn ramp(grid: &GridSpec) -> Vec<f64> {
    (0..grid.len()).map(|v| v as f64 * 0.5 - 3.0).collect()
}

#[test]
fn field_round_trip_keeps_values_and_config() {
    let grid = GridSpec::new(16, 4.0).unwrap();
    let values = ramp(&grid);
    let config = json!({"command": "sample-field", "seed": 3});
    let mut bytes = Vec::new();
    write_field(&mut bytes, &grid, &values, &config).unwrap();
    let snap = read_field(bytes.as_slice()).unwrap();
    assert_eq!(snap.n, 16);
    assert_eq!(snap.spacing, 0.25);
    assert_eq!(snap.values, values);
    assert_eq!(snap.config, Some(config));
    assert_eq!(snap.grid().unwrap(), grid);
}

#[test]
fn field_layout_is_little_endian_with_fixed_header() {
    let grid = GridSpec::new(16, 4.0).unwrap();
    let values = ramp(&grid);
    let mut bytes = Vec::new();
    write_field(&mut bytes, &grid, &values, &json!({})).unwrap();
    assert_eq!(&bytes[..8], b"LFPPFLD1");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 16);
    assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 0.25);
    let first = FIELD_HEADER_LEN;
    assert_eq!(f64::from_le_bytes(bytes[first..first + 8].try_into().unwrap()), values[0]);
    let end = FIELD_HEADER_LEN + 256 * 8;
    assert_eq!(f64::from_le_bytes(bytes[end - 8..end].try_into().unwrap()), values[255]);
    assert_eq!(&bytes[end..end + 8], CONFIG_MAGIC);
    let len = u32::from_le_bytes(bytes[end + 8..end + 12].try_into().unwrap()) as usize;
    assert_eq!(bytes.len(), end + 12 + len);
    assert_eq!(&bytes[end + 12..], b"{}");
}

#[test]
fn field_without_trailer_reads() {
    let grid = GridSpec::new(16, 4.0).unwrap();
    let mut bytes = Vec::new();
    write_field(&mut bytes, &grid, &ramp(&grid), &json!({})).unwrap();
    bytes.truncate(FIELD_HEADER_LEN + 256 * 8);
    let snap = read_field(bytes.as_slice()).unwrap();
    assert_eq!(snap.config, None);
    assert_eq!(snap.values, ramp(&grid));
}

#[test]
fn malformed_fields_are_rejected() {
    let grid = GridSpec::new(16, 4.0).unwrap();
    let mut good = Vec::new();
    write_field(&mut good, &grid, &ramp(&grid), &json!({})).unwrap();

    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    assert!(read_field(bad_magic.as_slice()).is_err());
    assert!(read_field(&good[..FIELD_HEADER_LEN + 40]).is_err());
    assert!(read_field(&good[..10]).is_err());
    let mut junk = good[..FIELD_HEADER_LEN + 256 * 8].to_vec();
    junk.extend_from_slice(b"garbage!");
    assert!(read_field(junk.as_slice()).is_err());
    assert!(write_field(Vec::new(), &grid, &[0.0; 3], &json!({})).is_err());
}

#[test]
fn gray_levels_span_full_range() {
    assert_eq!(gray_levels(&[-1.0, 0.0, 1.0]), vec![0, 128, 255]);
    assert_eq!(gray_levels(&[2.0, 2.0]), vec![128, 128]);
}

#[test]
fn pgm_has_config_comment_and_flipped_rows() {
    let grid = GridSpec::new(16, 4.0).unwrap();
    let values = ramp(&grid);
    let mut bytes = Vec::new();
    write_pgm(&mut bytes, &grid, &values, &json!({"seed": 1})).unwrap();
    let header = b"P5\n# config {\"seed\":1}\n16 16\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    let body = &bytes[header.len()..];
    assert_eq!(body.len(), 256);
    // Top image row is lattice row j = 15.
    let levels = gray_levels(&values);
    assert_eq!(body[..16], levels[240..]);
    assert_eq!(body[240..], levels[..16]);
}

#[test]
fn overlay_blends_and_traces() {
    let grid = GridSpec::new(16, 4.0).unwrap();
    let values: Vec<f64> = (0..256).map(|v| (v % 2) as f64).collect();
    let mut ov = Overlay::new(&grid, &values);
    assert_eq!(ov.pixel(1), [255, 255, 255]);
    ov.fill(&[0], [200, 100, 0], 0.5);
    assert_eq!(ov.pixel(0), [100, 50, 0]);
    ov.trace(&[3], PATH_COLORS[1]);
    assert_eq!(ov.pixel(3), PATH_COLORS[1]);
    let mut bytes = Vec::new();
    ov.write_ppm(&mut bytes, &json!(null)).unwrap();
    let header = b"P6\n# config null\n16 16\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 3 * 256);
    // First image pixel is vertex 240 (i = 0, j = 15).
    assert_eq!(&bytes[header.len()..header.len() + 6], &[0, 0, 0, 255, 255, 255]);
}

#[test]
fn csv_writers() {
    let grid = GridSpec::new(16, 4.0).unwrap();
    let mut out = Vec::new();
    write_vertex_csv(&mut out, &grid, &[0, 17], &[0.0, 1.5], &json!({"a": 1})).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "# config {\"a\":1}\nx_index,y_index,cumulative_distance\n0,0,0\n1,1,1.5\n");
    assert!(write_vertex_csv(Vec::new(), &grid, &[0], &[], &json!({})).is_err());

    let mut out = Vec::new();
    write_table_csv(&mut out, &["r", "v"], &[vec![0.5, 2.0]], &json!({})).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "# config {}\nr,v\n0.5,2\n");
    assert!(write_table_csv(Vec::new(), &["r"], &[vec![1.0, 2.0]], &json!({})).is_err());
}

#[test]
fn envelope_wraps_config_and_result() {
    let rec = DistanceRecord { xi: 0.4, epsilon: 0.125, query: "point".into(), value: 1.25, seed: 9 };
    let bytes = envelope(&json!({"n": 8}), &rec).unwrap();
    assert_eq!(*bytes.last().unwrap(), b'\n');
    let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["config"]["n"], 8);
    assert_eq!(v["result"]["value"], 1.25);
    assert_eq!(v["result"]["query"], "point");
}
