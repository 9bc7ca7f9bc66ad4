use std::fs;
use std::path::Path;

use proptest::prelude::*;

use annofix::error::{Error, Offset};
use annofix::io::*;
use annofix_core::geometry::{BoxAnnotation, BoxDims, Pose2};
use annofix_core::pipeline::{correct_scene, CorrectionConfig};
use annofix_core::scene::{Scene, SceneMetadata, TimedPoint};
use annofix_core::synth::{generate, SynthConfig};

fn small_scene(seed: u64) -> Scene {
    let mut cfg = SynthConfig::mixed_traffic(0.03, seed);
    cfg.tracks.truncate(3);
    cfg.num_samples = 4;
    generate(&cfg).unwrap().0
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((name, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn scene_round_trips_exactly() {
    let scene = small_scene(1);
    let tmp = tempfile::tempdir().unwrap();
    write_scene(&scene, tmp.path()).unwrap();
    assert_eq!(read_scene(tmp.path()).unwrap(), scene);
}

#[test]
fn write_read_write_is_byte_identical() {
    let scene = small_scene(2);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_scene(&scene, a.path()).unwrap();
    write_scene(&read_scene(a.path()).unwrap(), b.path()).unwrap();
    let files = dir_files(a.path());
    assert_eq!(files.len(), 3 + scene.num_samples());
    assert_eq!(files, dir_files(b.path()));
}

#[test]
fn documented_point_record() {
    let bytes = encode_points(&[TimedPoint::new(1.5, -2.0, 0.25, 0.03)]);
    let expected: Vec<u8> = "00 00 C0 3F 00 00 00 C0 00 00 80 3E 8F C2 F5 3C"
        .split(' ')
        .map(|h| u8::from_str_radix(h, 16).unwrap())
        .collect();
    assert_eq!(bytes, expected);
    let back = decode_points(&bytes, Path::new("p.bin")).unwrap();
    assert_eq!(back[0], TimedPoint::new(1.5, -2.0, 0.25, 0.03f32 as f64));
}

#[test]
fn empty_cloud_is_a_zero_length_file() {
    let mut scene = small_scene(3);
    scene.clouds[1].clear();
    let tmp = tempfile::tempdir().unwrap();
    write_scene(&scene, tmp.path()).unwrap();
    assert_eq!(fs::metadata(points_path(tmp.path(), 1)).unwrap().len(), 0);
    assert_eq!(read_scene(tmp.path()).unwrap(), scene);
}

#[test]
fn truncated_points_report_byte_offset() {
    let scene = small_scene(4);
    let tmp = tempfile::tempdir().unwrap();
    write_scene(&scene, tmp.path()).unwrap();
    let path = points_path(tmp.path(), 2);
    let mut bytes = fs::read(&path).unwrap();
    let whole = bytes.len();
    bytes.truncate(whole - 5);
    fs::write(&path, &bytes).unwrap();
    match read_scene(tmp.path()) {
        Err(Error::MalformedRecord { file, offset, .. }) => {
            assert_eq!(file, path);
            assert_eq!(offset, Offset::Byte(whole - POINT_RECORD_BYTES));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn duplicate_box_names_its_line() {
    let mut scene = small_scene(5);
    let dup = scene.annotations[2].clone();
    scene.annotations.push(dup);
    let tmp = tempfile::tempdir().unwrap();
    write_scene(&scene, tmp.path()).unwrap();
    let line = scene.annotations.len();
    match read_scene(tmp.path()) {
        Err(e @ Error::InvariantViolation { .. }) => {
            let Error::InvariantViolation {
                file,
                offset,
                message,
            } = &e
            else {
                unreachable!()
            };
            assert_eq!(file, &tmp.path().join(ANNOTATIONS_FILE));
            assert_eq!(offset, &Offset::Line(line));
            assert!(message.contains("duplicate"), "{message}");
            assert!(e.to_string().contains(&format!("line {line}")));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unreadable_inputs() {
    let scene = small_scene(6);
    let tmp = tempfile::tempdir().unwrap();
    write_scene(&scene, tmp.path()).unwrap();
    fs::remove_file(points_path(tmp.path(), 3)).unwrap();
    assert!(matches!(read_scene(tmp.path()), Err(Error::MissingFile(p)) if p.ends_with("3.bin")));

    write_scene(&scene, tmp.path()).unwrap();
    let ann = tmp.path().join(ANNOTATIONS_FILE);
    let mut text = fs::read_to_string(&ann).unwrap();
    text.push_str("{\"track_id\": 3}\n");
    fs::write(&ann, text).unwrap();
    let lines = scene.annotations.len() + 1;
    assert!(matches!(
        read_scene(tmp.path()),
        Err(Error::MalformedRecord { offset: Offset::Line(l), .. }) if l == lines
    ));
    assert_eq!(
        Error::MissingFile("x".into()).exit_code(),
        1,
        "data errors exit with 1"
    );
}

#[test]
fn corrected_round_trip_flags_pass_through() {
    let mut scene = small_scene(7);
    let mut lone = scene.annotations[0].clone();
    lone.track_id = "lone".into();
    scene.annotations.push(lone);
    let mut cfg = CorrectionConfig::for_scene(&scene);
    cfg.search.max_evaluations = Some(200);
    let result = correct_scene(&scene, &cfg).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    write_corrected(&result, tmp.path()).unwrap();
    assert_eq!(read_corrected(tmp.path()).unwrap(), result);
    let text = fs::read_to_string(tmp.path().join(CORRECTED_FILE)).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.contains("\"skipped\":\"too_short\""), "{last}");
    assert!(last.contains("\"speed\":null"), "{last}");
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("{\"track_id\":"), "{first}");
    assert!(first.contains("\"skipped\":null"), "{first}");
}

fn one_box_scene(b: BoxAnnotation) -> Scene {
    Scene {
        metadata: SceneMetadata {
            annotation_frequency: 10.0,
            sensor_period: 0.1,
            timestamps: vec![b.timestamp],
        },
        annotations: vec![b],
        ego: vec![Pose2::new(0.0, 0.0, 0.0)],
        clouds: vec![Vec::new()],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn annotation_floats_survive_exactly(
        x in -1e6..1e6f64, y in -1e-6..1e-6f64, theta in -3.2..3.2f64,
        z in -5.0..5.0f64, l in 1e-3..30.0f64, w in 1e-3..5.0f64, h in 1e-3..5.0f64,
        t in 0.0..1e9f64,
    ) {
        let b = BoxAnnotation {
            track_id: "t\"1".into(),
            sample_index: 0,
            timestamp: t,
            pose: Pose2::new(x, y, theta),
            z,
            dims: BoxDims::new(l, w, h).unwrap(),
        };
        let scene = one_box_scene(b);
        let tmp = tempfile::tempdir().unwrap();
        write_scene(&scene, tmp.path()).unwrap();
        let back = read_scene(tmp.path()).unwrap();
        let (a, b) = (&back.annotations[0], &scene.annotations[0]);
        prop_assert_eq!(a.pose.x.to_bits(), b.pose.x.to_bits());
        prop_assert_eq!(a.pose.y.to_bits(), b.pose.y.to_bits());
        prop_assert_eq!(a.pose.theta().to_bits(), b.pose.theta().to_bits());
        prop_assert_eq!(a.timestamp.to_bits(), b.timestamp.to_bits());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn point_encoding_is_f32_exact(
        pts in proptest::collection::vec((any::<f32>(), any::<f32>(), any::<f32>(), any::<f32>()), 0..40)
    ) {
        let pts: Vec<TimedPoint> = pts
            .into_iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite() && p.2.is_finite() && p.3.is_finite())
            .map(|(x, y, z, dt)| TimedPoint::new(x as f64, y as f64, z as f64, dt as f64))
            .collect();
        let bytes = encode_points(&pts);
        prop_assert_eq!(bytes.len(), pts.len() * POINT_RECORD_BYTES);
        prop_assert_eq!(decode_points(&bytes, Path::new("p")).unwrap(), pts);
    }
}
