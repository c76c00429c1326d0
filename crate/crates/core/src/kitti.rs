//! KITTI object-detection data ingestion: velodyne binary frames, object
//! label files, calibration files, ground-truth point labeling via 3D boxes,
//! and PLY export for visual inspection.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KittiError {
    #[error("malformed velodyne frame: {len} bytes is not a multiple of 16")]
    MalformedFrame { len: usize },
    #[error("malformed point at index {index}: non-finite component")]
    MalformedPoint { index: usize },
    #[error("label parse error at line {line}: {reason}")]
    LabelParse { line: usize, reason: String },
    #[error("calibration is missing key {key:?}")]
    MissingCalibration { key: &'static str },
    #[error("calibration parse error: {0}")]
    CalibrationParse(String),
    #[error("rectifying rotation is not orthonormal")]
    NonOrthonormalRect,
    #[error("got {got} classes for {expected} points")]
    LengthMismatch { expected: usize, got: usize },
}

/// One LiDAR return: sensor-frame position in meters (x forward, y left,
/// z up) and a reflectance intensity in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
}

impl Point {
    pub fn new(x: f32, y: f32, z: f32, intensity: f32) -> Self {
        Point { x, y, z, intensity }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }
}

/// A frame of LiDAR returns. Point order is stable: index `i` always refers
/// to the same return within the frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub frame_id: String,
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(frame_id: impl Into<String>, points: Vec<Point>) -> Self {
        PointCloud { frame_id: frame_id.into(), points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(Point::position).collect()
    }
}

/// Target classes. `Ignored` is the catch-all for points that fit no class
/// (walls, trees, poles) and for low-confidence predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PointClass {
    Car,
    Pedestrian,
    Cyclist,
    Ignored,
}

impl PointClass {
    pub const ALL: [PointClass; 4] = [
        PointClass::Car,
        PointClass::Pedestrian,
        PointClass::Cyclist,
        PointClass::Ignored,
    ];

    /// The three classes that carry ground-truth labels.
    pub const LABELED: [PointClass; 3] =
        [PointClass::Car, PointClass::Pedestrian, PointClass::Cyclist];

    /// Fixed integer encoding used in every file format.
    pub fn code(self) -> u8 {
        match self {
            PointClass::Car => 0,
            PointClass::Pedestrian => 1,
            PointClass::Cyclist => 2,
            PointClass::Ignored => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<PointClass> {
        match code {
            0 => Some(PointClass::Car),
            1 => Some(PointClass::Pedestrian),
            2 => Some(PointClass::Cyclist),
            3 => Some(PointClass::Ignored),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self.code() as usize
    }

    /// Maps a KITTI object type string. Anything outside the three target
    /// types (Van, Truck, Tram, Misc, DontCare, ...) is `Ignored`.
    pub fn from_kitti_type(kind: &str) -> PointClass {
        match kind {
            "Car" => PointClass::Car,
            "Pedestrian" => PointClass::Pedestrian,
            "Cyclist" => PointClass::Cyclist,
            _ => PointClass::Ignored,
        }
    }
}

impl fmt::Display for PointClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PointClass::Car => "Car",
            PointClass::Pedestrian => "Pedestrian",
            PointClass::Cyclist => "Cyclist",
            PointClass::Ignored => "Ignored",
        };
        f.write_str(name)
    }
}

/// One object annotation: a rotated 3D box in the rectified camera frame.
/// Per KITTI convention the stored center sits on the bottom face, the
/// camera y axis points down, and the box occupies y' in [-height, 0]
/// after undoing `rotation_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectLabel {
    pub class: PointClass,
    pub box_height: f64,
    pub box_width: f64,
    pub box_length: f64,
    pub box_center: [f64; 3],
    pub rotation_y: f64,
}

impl ObjectLabel {
    pub fn volume(&self) -> f64 {
        self.box_height * self.box_width * self.box_length
    }

    /// Containment test for a point already in rectified camera coordinates.
    /// Boundaries are inclusive; non-positive dimensions match nothing.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let dx = p[0] - self.box_center[0];
        let dy = p[1] - self.box_center[1];
        let dz = p[2] - self.box_center[2];
        let (s, c) = self.rotation_y.sin_cos();
        // Undo the yaw: object x is length, object z is width.
        let lx = c * dx - s * dz;
        let lz = s * dx + c * dz;
        lx.abs() <= self.box_length / 2.0
            && lz.abs() <= self.box_width / 2.0
            && dy <= 0.0
            && dy >= -self.box_height
    }
}

/// Rigid transform chain from the velodyne frame to the rectified camera
/// frame: `p_rect = rect * (velo_to_cam * [p; 1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub velo_to_cam: [[f64; 4]; 3],
    pub rect: [[f64; 3]; 3],
}

impl Calibration {
    pub fn identity() -> Self {
        Calibration {
            velo_to_cam: [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
            rect: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn velo_to_rect(&self, p: [f64; 3]) -> [f64; 3] {
        let mut cam = [0.0; 3];
        for (r, row) in self.velo_to_cam.iter().enumerate() {
            cam[r] = row[0] * p[0] + row[1] * p[1] + row[2] * p[2] + row[3];
        }
        let mut out = [0.0; 3];
        for (r, row) in self.rect.iter().enumerate() {
            out[r] = row[0] * cam[0] + row[1] * cam[1] + row[2] * cam[2];
        }
        out
    }

    fn rect_is_orthonormal(&self) -> bool {
        // R * R^T must be the identity within 1e-4 entrywise.
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| self.rect[i][k] * self.rect[j][k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > 1e-4 {
                    return false;
                }
            }
        }
        true
    }
}

const POINT_STRIDE: usize = 16;

/// Decodes a KITTI velodyne frame: consecutive little-endian f32 quadruples
/// (x, y, z, reflectance), 16 bytes per point. Out-of-range reflectance is
/// clamped to [0, 1]; KITTI occasionally contains such values.
pub fn parse_velodyne_bin(
    frame_id: impl Into<String>,
    bytes: &[u8],
) -> Result<PointCloud, KittiError> {
    if bytes.len() % POINT_STRIDE != 0 {
        return Err(KittiError::MalformedFrame { len: bytes.len() });
    }
    let frame_id = frame_id.into();
    let mut points = Vec::with_capacity(bytes.len() / POINT_STRIDE);
    let mut clamped = 0usize;
    for (index, chunk) in bytes.chunks_exact(POINT_STRIDE).enumerate() {
        let f = |o: usize| f32::from_le_bytes(chunk[o..o + 4].try_into().unwrap());
        let (x, y, z, r) = (f(0), f(4), f(8), f(12));
        if !(x.is_finite() && y.is_finite() && z.is_finite() && r.is_finite()) {
            return Err(KittiError::MalformedPoint { index });
        }
        let intensity = if (0.0..=1.0).contains(&r) {
            r
        } else {
            clamped += 1;
            r.clamp(0.0, 1.0)
        };
        points.push(Point { x, y, z, intensity });
    }
    if clamped > 0 {
        log::warn!("frame {frame_id}: clamped {clamped} out-of-range intensity values");
    }
    Ok(PointCloud { frame_id, points })
}

/// Inverse of [`parse_velodyne_bin`]: round-trips bit-exactly for any cloud
/// whose intensities are already in range.
pub fn serialize_velodyne_bin(cloud: &PointCloud) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(cloud.len() * POINT_STRIDE);
    for p in &cloud.points {
        bytes.extend_from_slice(&p.x.to_le_bytes());
        bytes.extend_from_slice(&p.y.to_le_bytes());
        bytes.extend_from_slice(&p.z.to_le_bytes());
        bytes.extend_from_slice(&p.intensity.to_le_bytes());
    }
    bytes
}

/// Parses a KITTI object label file: 15 whitespace-delimited columns per
/// line (type, truncation, occlusion, alpha, 2D bbox x4, h w l, x y z,
/// rotation_y). "DontCare" and unknown types yield `Ignored` labels.
pub fn parse_label_file(text: &str) -> Result<Vec<ObjectLabel>, KittiError> {
    let mut labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split_whitespace().collect();
        if cols.len() != 15 {
            return Err(KittiError::LabelParse {
                line,
                reason: format!("expected 15 columns, found {}", cols.len()),
            });
        }
        let num = |col: usize| -> Result<f64, KittiError> {
            cols[col].parse::<f64>().map_err(|_| KittiError::LabelParse {
                line,
                reason: format!("column {} is not numeric: {:?}", col + 1, cols[col]),
            })
        };
        let class = PointClass::from_kitti_type(cols[0]);
        let label = ObjectLabel {
            class,
            box_height: num(8)?,
            box_width: num(9)?,
            box_length: num(10)?,
            box_center: [num(11)?, num(12)?, num(13)?],
            rotation_y: num(14)?,
        };
        // Real objects need a real box; DontCare rows carry -1 dimensions
        // and are kept as degenerate Ignored labels that match nothing.
        if label.class != PointClass::Ignored
            && (label.box_height <= 0.0 || label.box_width <= 0.0 || label.box_length <= 0.0)
        {
            return Err(KittiError::LabelParse {
                line,
                reason: "non-positive box dimensions for a labeled object".into(),
            });
        }
        labels.push(label);
    }
    Ok(labels)
}

/// Parses a KITTI calibration file ("key: v1 v2 ..." lines). Requires
/// "Tr_velo_to_cam" (12 floats, row-major 3x4) and "R0_rect" (9 floats,
/// row-major 3x3).
pub fn parse_calibration(text: &str) -> Result<Calibration, KittiError> {
    let mut velo_to_cam: Option<Vec<f64>> = None;
    let mut rect: Option<Vec<f64>> = None;
    for raw in text.lines() {
        let Some((key, rest)) = raw.split_once(':') else { continue };
        let key = key.trim();
        if key != "Tr_velo_to_cam" && key != "R0_rect" {
            continue;
        }
        let mut values = Vec::new();
        for tok in rest.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                KittiError::CalibrationParse(format!("{key}: bad float {tok:?}"))
            })?;
            values.push(v);
        }
        match key {
            "Tr_velo_to_cam" => velo_to_cam = Some(values),
            _ => rect = Some(values),
        }
    }
    let velo = velo_to_cam.ok_or(KittiError::MissingCalibration { key: "Tr_velo_to_cam" })?;
    let rect = rect.ok_or(KittiError::MissingCalibration { key: "R0_rect" })?;
    if velo.len() != 12 {
        return Err(KittiError::CalibrationParse(format!(
            "Tr_velo_to_cam: expected 12 floats, found {}",
            velo.len()
        )));
    }
    if rect.len() != 9 {
        return Err(KittiError::CalibrationParse(format!(
            "R0_rect: expected 9 floats, found {}",
            rect.len()
        )));
    }
    let mut calib = Calibration::identity();
    for r in 0..3 {
        for c in 0..4 {
            calib.velo_to_cam[r][c] = velo[r * 4 + c];
        }
        for c in 0..3 {
            calib.rect[r][c] = rect[r * 3 + c];
        }
    }
    if !calib.rect_is_orthonormal() {
        return Err(KittiError::NonOrthonormalRect);
    }
    Ok(calib)
}

/// Assigns a ground-truth class to every point: the class of the smallest
/// (by volume) label box containing the rectified-camera image of the point,
/// ties broken by label-file order; `Ignored` when no box contains it.
pub fn label_points(
    cloud: &PointCloud,
    labels: &[ObjectLabel],
    calib: &Calibration,
) -> Vec<PointClass> {
    cloud
        .points
        .iter()
        .map(|p| {
            let cam = calib.velo_to_rect(p.position());
            let mut best: Option<(f64, PointClass)> = None;
            for label in labels {
                if !label.contains(cam) {
                    continue;
                }
                let vol = label.volume();
                match best {
                    Some((best_vol, _)) if best_vol <= vol => {}
                    _ => best = Some((vol, label.class)),
                }
            }
            best.map_or(PointClass::Ignored, |(_, class)| class)
        })
        .collect()
}

fn class_color(class: PointClass) -> [u8; 3] {
    match class {
        PointClass::Car => [255, 0, 0],
        PointClass::Pedestrian => [0, 255, 0],
        PointClass::Cyclist => [0, 0, 255],
        PointClass::Ignored => [128, 128, 128],
    }
}

/// Deterministic color for a cluster id; negative ids (noise, ground) map
/// to grays.
pub fn cluster_color(id: i64) -> [u8; 3] {
    match id {
        -1 => [96, 96, 96],
        i if i < 0 => [160, 160, 160],
        i => {
            // splitmix64 keeps nearby ids visually distinct.
            let mut h = (i as u64).wrapping_add(0x9e3779b97f4a7c15);
            h = (h ^ (h >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            h = (h ^ (h >> 27)).wrapping_mul(0x94d049bb133111eb);
            h ^= h >> 31;
            // Bias each channel upward so clusters stay visible on black.
            [
                64 + (h & 0xbf) as u8,
                64 + ((h >> 8) & 0xbf) as u8,
                64 + ((h >> 16) & 0xbf) as u8,
            ]
        }
    }
}

fn ply_bytes(cloud: &PointCloud, colors: impl Iterator<Item = [u8; 3]>) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    out.push_str(
        "property float x\nproperty float y\nproperty float z\nproperty float intensity\n",
    );
    out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n");
    for (p, [r, g, b]) in cloud.points.iter().zip(colors) {
        out.push_str(&format!(
            "{} {} {} {} {} {} {}\n",
            p.x, p.y, p.z, p.intensity, r, g, b
        ));
    }
    out.into_bytes()
}

/// ASCII PLY export with a fixed per-class palette: Car red, Pedestrian
/// green, Cyclist blue, Ignored gray.
pub fn export_ply(cloud: &PointCloud, classes: &[PointClass]) -> Result<Vec<u8>, KittiError> {
    if classes.len() != cloud.len() {
        return Err(KittiError::LengthMismatch { expected: cloud.len(), got: classes.len() });
    }
    Ok(ply_bytes(cloud, classes.iter().map(|&c| class_color(c))))
}

/// ASCII PLY export colored by cluster id (see [`cluster_color`]).
pub fn export_ply_clusters(cloud: &PointCloud, cluster_ids: &[i64]) -> Result<Vec<u8>, KittiError> {
    if cluster_ids.len() != cloud.len() {
        return Err(KittiError::LengthMismatch { expected: cloud.len(), got: cluster_ids.len() });
    }
    Ok(ply_bytes(cloud, cluster_ids.iter().map(|&id| cluster_color(id))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn encode(quads: &[(f32, f32, f32, f32)]) -> Vec<u8> {
        let points = quads
            .iter()
            .map(|&(x, y, z, i)| Point::new(x, y, z, i))
            .collect();
        serialize_velodyne_bin(&PointCloud::new("t", points))
    }

    #[test]
    fn decodes_single_point() {
        let cloud = parse_velodyne_bin("f", &encode(&[(1.0, 2.0, 3.0, 0.5)])).unwrap();
        assert_eq!(cloud.points, vec![Point::new(1.0, 2.0, 3.0, 0.5)]);
    }

    #[test]
    fn empty_bytes_yield_empty_cloud() {
        let cloud = parse_velodyne_bin("f", &[]).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn rejects_partial_point() {
        let err = parse_velodyne_bin("f", &[0u8; 20]).unwrap_err();
        assert_eq!(err, KittiError::MalformedFrame { len: 20 });
    }

    #[test]
    fn rejects_non_finite_component_with_index() {
        let mut bytes = encode(&[(1.0, 2.0, 3.0, 0.5), (1.0, 2.0, 3.0, 0.5)]);
        bytes[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = parse_velodyne_bin("f", &bytes).unwrap_err();
        assert_eq!(err, KittiError::MalformedPoint { index: 1 });
    }

    #[test]
    fn clamps_out_of_range_intensity() {
        let cloud = parse_velodyne_bin("f", &encode(&[(0.0, 0.0, 0.0, 1.5)])).unwrap();
        assert_eq!(cloud.points[0].intensity, 1.0);
        let cloud = parse_velodyne_bin("f", &encode(&[(0.0, 0.0, 0.0, -0.25)])).unwrap();
        assert_eq!(cloud.points[0].intensity, 0.0);
    }

    // Round-trip oracle: serialize then parse must reproduce the cloud
    // bit for bit.
    #[test]
    fn binary_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let points: Vec<Point> = (0..10_000)
            .map(|_| {
                Point::new(
                    rng.random_range(-80.0..80.0),
                    rng.random_range(-80.0..80.0),
                    rng.random_range(-3.0..10.0),
                    rng.random_range(0.0..=1.0),
                )
            })
            .collect();
        let cloud = PointCloud::new("rt", points);
        let parsed = parse_velodyne_bin("rt", &serialize_velodyne_bin(&cloud)).unwrap();
        assert_eq!(parsed, cloud);
    }

    const CAR_LINE: &str =
        "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59";

    #[test]
    fn parses_car_label_line() {
        let labels = parse_label_file(CAR_LINE).unwrap();
        assert_eq!(labels.len(), 1);
        let l = &labels[0];
        assert_eq!(l.class, PointClass::Car);
        assert_eq!(l.box_height, 1.65);
        assert_eq!(l.box_width, 1.67);
        assert_eq!(l.box_length, 3.64);
        assert_eq!(l.box_center, [-0.65, 1.71, 46.70]);
        assert_eq!(l.rotation_y, -1.59);
    }

    #[test]
    fn dontcare_maps_to_ignored() {
        let line = "DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10";
        let labels = parse_label_file(line).unwrap();
        assert_eq!(labels[0].class, PointClass::Ignored);
    }

    #[test]
    fn empty_label_file_is_empty() {
        assert!(parse_label_file("").unwrap().is_empty());
        assert!(parse_label_file("\n\n").unwrap().is_empty());
    }

    #[test]
    fn label_errors_carry_line_numbers() {
        let text = format!("{CAR_LINE}\nCar 1 2 3");
        match parse_label_file(&text).unwrap_err() {
            KittiError::LabelParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        let text = CAR_LINE.replace("1.65", "abc");
        assert!(matches!(
            parse_label_file(&text).unwrap_err(),
            KittiError::LabelParse { line: 1, .. }
        ));
    }

    const IDENTITY_CALIB: &str = "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 1 0 0 0 1 0 0 0 1\n";

    #[test]
    fn parses_identity_calibration() {
        let calib = parse_calibration(IDENTITY_CALIB).unwrap();
        assert_eq!(calib, Calibration::identity());
    }

    #[test]
    fn missing_rect_key_is_an_error() {
        let err = parse_calibration("Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n").unwrap_err();
        assert_eq!(err, KittiError::MissingCalibration { key: "R0_rect" });
    }

    // Fixture with hand-checked values: rotation about z by 90 degrees plus
    // a translation, rect a permutation matrix.
    #[test]
    fn parses_known_calibration_exactly() {
        let text = "P2: 7 0 6 0 0 7 2 0 0 0 1 0\n\
                    R0_rect: 0 1 0 0 0 1 1 0 0\n\
                    Tr_velo_to_cam: 0 -1 0 0.5 1 0 0 -1.25 0 0 1 2.0\n";
        let calib = parse_calibration(text).unwrap();
        assert_eq!(
            calib.velo_to_cam,
            [[0.0, -1.0, 0.0, 0.5], [1.0, 0.0, 0.0, -1.25], [0.0, 0.0, 1.0, 2.0]]
        );
        assert_eq!(calib.rect, [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]);
        // (1, 2, 3) -> velo_to_cam -> (-1.5, -0.25, 5) -> rect -> (-0.25, 5, -1.5)
        let p = calib.velo_to_rect([1.0, 2.0, 3.0]);
        assert!((p[0] - -0.25).abs() < 1e-12);
        assert!((p[1] - 5.0).abs() < 1e-12);
        assert!((p[2] - -1.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_orthonormal_rect() {
        let text = "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 1 0 0 0 1 0 0 0 2\n";
        assert_eq!(parse_calibration(text).unwrap_err(), KittiError::NonOrthonormalRect);
    }

    #[test]
    fn rejects_wrong_float_count() {
        let text = "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1\nR0_rect: 1 0 0 0 1 0 0 0 1\n";
        assert!(matches!(
            parse_calibration(text).unwrap_err(),
            KittiError::CalibrationParse(_)
        ));
    }

    fn unit_box(class: PointClass) -> ObjectLabel {
        ObjectLabel {
            class,
            box_height: 1.0,
            box_width: 1.0,
            box_length: 1.0,
            box_center: [0.0, 0.0, 0.0],
            rotation_y: 0.0,
        }
    }

    #[test]
    fn point_at_box_center_gets_the_class() {
        let cloud = PointCloud::new("f", vec![Point::new(0.0, 0.0, 0.0, 0.5)]);
        let classes = label_points(&cloud, &[unit_box(PointClass::Pedestrian)], &Calibration::identity());
        assert_eq!(classes, vec![PointClass::Pedestrian]);
    }

    #[test]
    fn far_point_is_ignored() {
        let cloud = PointCloud::new("f", vec![Point::new(100.0, 100.0, 0.0, 0.5)]);
        let classes = label_points(&cloud, &[unit_box(PointClass::Car)], &Calibration::identity());
        assert_eq!(classes, vec![PointClass::Ignored]);
    }

    // Brute-force containment oracle for an axis-aligned unit box at the
    // origin under identity calibration: the box occupies |x| <= 0.5,
    // -1 <= y <= 0, |z| <= 0.5.
    #[test]
    fn labeling_matches_brute_force_containment() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<Point> = (0..1000)
            .map(|_| {
                Point::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    0.5,
                )
            })
            .collect();
        let cloud = PointCloud::new("f", points);
        let classes = label_points(&cloud, &[unit_box(PointClass::Car)], &Calibration::identity());
        for (p, got) in cloud.points.iter().zip(&classes) {
            let inside = p.x.abs() <= 0.5 && p.y <= 0.0 && p.y >= -1.0 && p.z.abs() <= 0.5;
            let expect = if inside { PointClass::Car } else { PointClass::Ignored };
            assert_eq!(*got, expect, "point {p:?}");
        }
    }

    #[test]
    fn smallest_box_wins_overlap() {
        let big = ObjectLabel { box_height: 4.0, box_width: 4.0, box_length: 4.0, ..unit_box(PointClass::Car) };
        let small = unit_box(PointClass::Pedestrian);
        let cloud = PointCloud::new("f", vec![Point::new(0.0, -0.5, 0.0, 0.5)]);
        let calib = Calibration::identity();
        let a = label_points(&cloud, &[big.clone(), small.clone()], &calib);
        let b = label_points(&cloud, &[small, big], &calib);
        assert_eq!(a, vec![PointClass::Pedestrian]);
        assert_eq!(a, b);
    }

    #[test]
    fn disjoint_boxes_ignore_label_order() {
        let mut left = unit_box(PointClass::Car);
        left.box_center = [-5.0, 0.0, 0.0];
        let mut right = unit_box(PointClass::Cyclist);
        right.box_center = [5.0, 0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points: Vec<Point> = (0..500)
            .map(|_| {
                Point::new(rng.random_range(-7.0..7.0), rng.random_range(-2.0..1.0), rng.random_range(-1.0..1.0), 0.0)
            })
            .collect();
        let cloud = PointCloud::new("f", points);
        let calib = Calibration::identity();
        let a = label_points(&cloud, &[left.clone(), right.clone()], &calib);
        let b = label_points(&cloud, &[right, left], &calib);
        assert_eq!(a, b);
    }

    #[test]
    fn rotated_box_containment() {
        // 4x1x1 box yawed 90 degrees: its length now runs along camera z.
        let label = ObjectLabel {
            class: PointClass::Car,
            box_height: 1.0,
            box_width: 1.0,
            box_length: 4.0,
            box_center: [0.0, 0.0, 0.0],
            rotation_y: std::f64::consts::FRAC_PI_2,
        };
        let calib = Calibration::identity();
        let cloud = PointCloud::new(
            "f",
            vec![Point::new(0.0, -0.5, 1.8, 0.0), Point::new(1.8, -0.5, 0.0, 0.0)],
        );
        let classes = label_points(&cloud, &[label], &calib);
        assert_eq!(classes, vec![PointClass::Car, PointClass::Ignored]);
    }

    #[test]
    fn ply_export_single_car_point() {
        let cloud = PointCloud::new("f", vec![Point::new(1.0, 2.0, 3.0, 0.5)]);
        let ply = export_ply(&cloud, &[PointClass::Car]).unwrap();
        let text = String::from_utf8(ply).unwrap();
        assert!(text.contains("element vertex 1\n"));
        assert!(text.ends_with("1 2 3 0.5 255 0 0\n"));
    }

    #[test]
    fn ply_export_empty_cloud() {
        let ply = export_ply(&PointCloud::default(), &[]).unwrap();
        let text = String::from_utf8(ply).unwrap();
        assert!(text.contains("element vertex 0\n"));
        assert!(text.ends_with("end_header\n"));
    }

    #[test]
    fn ply_export_rejects_length_mismatch() {
        let cloud = PointCloud::new("f", vec![Point::new(0.0, 0.0, 0.0, 0.0)]);
        assert!(export_ply(&cloud, &[]).is_err());
    }

    // Text round-trip oracle: re-parse exported positions and compare.
    #[test]
    fn ply_positions_survive_text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let points: Vec<Point> = (0..100)
            .map(|_| {
                Point::new(
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(0.0..=1.0),
                )
            })
            .collect();
        let cloud = PointCloud::new("f", points);
        let classes = vec![PointClass::Ignored; cloud.len()];
        let text = String::from_utf8(export_ply(&cloud, &classes).unwrap()).unwrap();
        let body = text.split("end_header\n").nth(1).unwrap();
        for (line, p) in body.lines().zip(&cloud.points) {
            let cols: Vec<f32> = line
                .split_whitespace()
                .take(4)
                .map(|t| t.parse().unwrap())
                .collect();
            assert!((cols[0] - p.x).abs() < 1e-5);
            assert!((cols[1] - p.y).abs() < 1e-5);
            assert!((cols[2] - p.z).abs() < 1e-5);
            assert!((cols[3] - p.intensity).abs() < 1e-5);
        }
    }

    #[test]
    fn cluster_colors_are_deterministic() {
        assert_eq!(cluster_color(5), cluster_color(5));
        assert_eq!(cluster_color(-1), [96, 96, 96]);
        assert_ne!(cluster_color(0), cluster_color(1));
    }
}
