//! SE(3) pose algebra, pose-increment encoding, point clouds and the ADD-S
//! trajectory metric.
//!
//! Rotations are stored as 3x3 matrices; axis-angle vectors appear only at
//! the increment interface, which avoids quaternion sign ambiguity in
//! training targets.

use nalgebra::{Matrix3, Vector3};

#[derive(Debug, thiserror::Error)]
pub enum GeomError {
    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),
    #[error("rotation increment angle {0} outside the principal branch (|w| < pi)")]
    IncrementOutOfRange(f64),
    #[error("pose sequences must be non-empty and equal-length: {0}")]
    BadSequence(String),
    #[error("threshold d_max must be positive, got {0}")]
    BadThreshold(f64),
}

pub type Result<T> = std::result::Result<T, GeomError>;

const ROT_TOL: f64 = 1e-9;
/// Angles above pi - this use the largest-diagonal axis extraction branch.
const NEAR_PI: f64 = 1e-3;

/// Rigid object pose: translation in meters plus a rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub translation: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self { translation: Vector3::zeros(), rotation: Matrix3::identity() }
    }

    pub fn new(translation: Vector3<f64>, rotation: Matrix3<f64>) -> Result<Self> {
        let pose = Self { translation, rotation };
        pose.validate()?;
        Ok(pose)
    }

    /// Orthonormality (R^T R = I) and det(R) = +1, both within 1e-9.
    pub fn validate(&self) -> Result<()> {
        if !self.translation.iter().all(|v| v.is_finite())
            || !self.rotation.iter().all(|v| v.is_finite())
        {
            return Err(GeomError::NonFinite("pose"));
        }
        let gram = self.rotation.transpose() * self.rotation;
        let ortho = (gram - Matrix3::identity()).norm();
        if ortho > ROT_TOL {
            return Err(GeomError::InvalidRotation(format!("|R^T R - I| = {ortho:.3e}")));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > ROT_TOL {
            return Err(GeomError::InvalidRotation(format!("det(R) = {det}")));
        }
        Ok(())
    }

    /// q -> R q + p for a point in the object frame.
    pub fn apply(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }
}

/// 6-D pose increment: translation delta and axis-angle rotation increment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseIncrement {
    pub dp: Vector3<f64>,
    pub rotvec: Vector3<f64>,
}

impl PoseIncrement {
    pub fn zero() -> Self {
        Self { dp: Vector3::zeros(), rotvec: Vector3::zeros() }
    }

    /// Packed as [dp_x, dp_y, dp_z, w_x, w_y, w_z].
    pub fn to_array(&self) -> [f64; 6] {
        [self.dp.x, self.dp.y, self.dp.z, self.rotvec.x, self.rotvec.y, self.rotvec.z]
    }

    pub fn from_array(a: &[f64; 6]) -> Self {
        Self {
            dp: Vector3::new(a[0], a[1], a[2]),
            rotvec: Vector3::new(a[3], a[4], a[5]),
        }
    }
}

/// Object-frame surface sample, N x 3 meters.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Axis-angle vector to rotation matrix (Rodrigues). Small angles use a
/// second-order Taylor expansion of the trigonometric coefficients.
pub fn exp_map(w: &Vector3<f64>) -> Result<Matrix3<f64>> {
    if !w.iter().all(|v| v.is_finite()) {
        return Err(GeomError::NonFinite("exp_map"));
    }
    let theta_sq = w.norm_squared();
    let (a, b) = if theta_sq < 1e-16 {
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        let theta = theta_sq.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
    };
    let wx = skew(w);
    Ok(Matrix3::identity() + wx * a + wx * wx * b)
}

/// Rotation matrix to axis-angle vector on the principal branch.
///
/// The degenerate branch at angle pi recovers the axis from the largest
/// diagonal entry of R + I, with the sign fixed by the skew part when it is
/// nonzero and by lexicographic convention at exactly pi.
pub fn log_map(rot: &Matrix3<f64>) -> Result<Vector3<f64>> {
    Pose { translation: Vector3::zeros(), rotation: *rot }.validate()?;
    let cos_theta = ((rot.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    if theta < 1e-8 {
        // theta/(2 sin theta) ~ 1/2 + theta^2/12
        return Ok(vee(&(rot - rot.transpose())) * (0.5 + theta * theta / 12.0));
    }
    if theta < std::f64::consts::PI - NEAR_PI {
        return Ok(vee(&(rot - rot.transpose())) * (theta / (2.0 * theta.sin())));
    }
    // Near pi: R + I ~ 2 a a^T, so the largest diagonal column carries the axis.
    let sym = rot + Matrix3::identity();
    let i = (0..3)
        .max_by(|&a, &b| rot[(a, a)].partial_cmp(&rot[(b, b)]).unwrap())
        .unwrap();
    let col = sym.column(i).into_owned();
    let norm = col.norm();
    if norm == 0.0 {
        return Err(GeomError::InvalidRotation("degenerate axis at angle pi".into()));
    }
    let mut axis = col / norm;
    let skew_part = vee(&(rot - rot.transpose()));
    if skew_part.norm() > 1e-12 {
        if skew_part.dot(&axis) < 0.0 {
            axis = -axis;
        }
    } else {
        // Exactly pi: R(pi, a) == R(pi, -a); pick a deterministic sign.
        let lead = axis.iter().find(|v| v.abs() > 1e-12).copied().unwrap_or(1.0);
        if lead < 0.0 {
            axis = -axis;
        }
    }
    Ok(axis * theta)
}

/// Consecutive pose increments of a pose sequence of length H+1:
/// dp_k = p_k - p_{k-1} and w_k = log(R_k R_{k-1}^T).
pub fn encode_increments(poses: &[Pose]) -> Result<Vec<PoseIncrement>> {
    if poses.len() < 2 {
        return Err(GeomError::BadSequence(format!("need >= 2 poses, got {}", poses.len())));
    }
    for p in poses {
        p.validate()?;
    }
    poses
        .windows(2)
        .map(|w| {
            let rel = w[1].rotation * w[0].rotation.transpose();
            Ok(PoseIncrement {
                dp: w[1].translation - w[0].translation,
                rotvec: log_map(&rel)?,
            })
        })
        .collect()
}

/// Roll increments forward from an anchor pose:
/// p_k = p_{k-1} + dp_k and R_k = exp(w_k) R_{k-1}. Returns H poses,
/// excluding the anchor.
pub fn apply_increments(anchor: &Pose, increments: &[PoseIncrement]) -> Result<Vec<Pose>> {
    anchor.validate()?;
    let mut out = Vec::with_capacity(increments.len());
    let mut prev = *anchor;
    for inc in increments {
        let angle = inc.rotvec.norm();
        if !angle.is_finite() || !inc.dp.iter().all(|v| v.is_finite()) {
            return Err(GeomError::NonFinite("apply_increments"));
        }
        if angle >= std::f64::consts::PI {
            return Err(GeomError::IncrementOutOfRange(angle));
        }
        let next = Pose {
            translation: prev.translation + inc.dp,
            rotation: exp_map(&inc.rotvec)? * prev.rotation,
        };
        out.push(next);
        prev = next;
    }
    Ok(out)
}

/// Rigid transform of an object-frame cloud into the world frame.
pub fn transform_cloud(cloud: &PointCloud, pose: &Pose) -> Result<PointCloud> {
    pose.validate()?;
    Ok(PointCloud::new(cloud.points.iter().map(|q| pose.apply(q)).collect()))
}

/// Per-frame symmetric average closest-point distance between the cloud
/// posed by `pred` and by `gt`: the mean over ground-truth-posed points of
/// the distance to the nearest predicted-posed point.
pub fn add_s_frame(pred: &Pose, gt: &Pose, cloud: &PointCloud) -> Result<f64> {
    if cloud.is_empty() {
        return Err(GeomError::BadSequence("empty point cloud".into()));
    }
    let pred_pts = transform_cloud(cloud, pred)?;
    let gt_pts = transform_cloud(cloud, gt)?;
    let mut total = 0.0;
    for g in &gt_pts.points {
        let mut best = f64::INFINITY;
        for p in &pred_pts.points {
            let d = (g - p).norm_squared();
            if d < best {
                best = d;
            }
        }
        total += best.sqrt();
    }
    Ok(total / cloud.len() as f64)
}

/// ADD-S area under the curve over a trajectory, in [0, 100].
///
/// The accuracy curve is sampled at 100 evenly spaced thresholds in
/// (0, d_max]; a frame counts toward a threshold when its ADD-S is strictly
/// below it. Returns the AUC percentage and the per-frame ADD-S values.
pub fn add_s_auc(
    pred: &[Pose],
    gt: &[Pose],
    cloud: &PointCloud,
    d_max: f64,
) -> Result<(f64, Vec<f64>)> {
    if pred.is_empty() || pred.len() != gt.len() {
        return Err(GeomError::BadSequence(format!("{} pred vs {} gt", pred.len(), gt.len())));
    }
    if !(d_max > 0.0) {
        return Err(GeomError::BadThreshold(d_max));
    }
    let per_frame: Vec<f64> = pred
        .iter()
        .zip(gt.iter())
        .map(|(p, g)| add_s_frame(p, g, cloud))
        .collect::<Result<_>>()?;
    const STEPS: usize = 100;
    let frames = per_frame.len() as f64;
    let mut area = 0.0;
    for j in 1..=STEPS {
        let threshold = d_max * j as f64 / STEPS as f64;
        let below = per_frame.iter().filter(|&&d| d < threshold).count() as f64;
        area += below / frames;
    }
    Ok((100.0 * area / STEPS as f64, per_frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;
    use rand::Rng;
    use std::f64::consts::PI;

    use crate::rng::substream;

    fn random_rotvec<R: Rng>(rng: &mut R, max_angle: f64) -> Vector3<f64> {
        let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let axis = if axis.norm() < 1e-6 { Vector3::x() } else { axis.normalize() };
        axis * rng.gen_range(0.0..max_angle)
    }

    fn random_pose<R: Rng>(rng: &mut R) -> Pose {
        Pose {
            translation: Vector3::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            ),
            rotation: exp_map(&random_rotvec(rng, PI - 0.1)).unwrap(),
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(exp_map(&Vector3::zeros()).unwrap(), Matrix3::identity());
    }

    #[test]
    fn quarter_turn_about_z_maps_x_to_y() {
        let r = exp_map(&Vector3::new(0.0, 0.0, PI / 2.0)).unwrap();
        let y = r * Vector3::x();
        assert_relative_eq!(y, Vector3::y(), epsilon = 1e-15);
    }

    /// Rodrigues oracle with a normalized axis, written independently:
    /// R = I + sin(t) K + (1 - cos(t)) K^2 with K = skew(axis).
    #[test]
    fn exp_matches_rodrigues_oracle_termwise() {
        let mut rng = substream(31, "rodrigues");
        for _ in 0..200 {
            let w = random_rotvec(&mut rng, PI - 1e-6);
            let theta = w.norm();
            let got = exp_map(&w).unwrap();
            let oracle = if theta < 1e-12 {
                Matrix3::identity()
            } else {
                let k = skew(&(w / theta));
                Matrix3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos())
            };
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        (got[(i, j)] - oracle[(i, j)]).abs() <= 1e-12,
                        "entry ({i},{j}): {} vs {}",
                        got[(i, j)],
                        oracle[(i, j)]
                    );
                }
            }
            // Independent route: nalgebra's quaternion-backed rotation.
            let nalg = Rotation3::from_scaled_axis(w);
            assert!((got - nalg.into_inner()).norm() <= 1e-12);
        }
    }

    #[test]
    fn log_of_identity_is_zero() {
        assert_eq!(log_map(&Matrix3::identity()).unwrap(), Vector3::zeros());
    }

    #[test]
    fn log_inverts_exp_at_unit_angle() {
        let w = Vector3::new(0.6, -0.64, 0.48); // |w| = 1
        assert_relative_eq!(w.norm(), 1.0, epsilon = 1e-12);
        let back = log_map(&exp_map(&w).unwrap()).unwrap();
        assert_relative_eq!(back, w, epsilon = 1e-12);
    }

    #[test]
    fn exp_log_round_trip_below_pi() {
        let mut rng = substream(32, "roundtrip");
        for _ in 0..500 {
            let w = random_rotvec(&mut rng, PI - 1e-3);
            let r = exp_map(&w).unwrap();
            let r2 = exp_map(&log_map(&r).unwrap()).unwrap();
            assert!((r - r2).norm() <= 1e-9, "frobenius {}", (r - r2).norm());
        }
    }

    /// Near pi the axis comes from diagonal extraction; the oracle is the
    /// quaternion route.
    #[test]
    fn log_near_pi_matches_quaternion_extraction() {
        let mut rng = substream(33, "nearpi");
        for _ in 0..200 {
            let axis = random_rotvec(&mut rng, 1.0);
            let axis = if axis.norm() < 1e-9 { Vector3::x() } else { axis.normalize() };
            let theta = PI - rng.gen_range(0.0..9e-4);
            let w = axis * theta;
            let r = exp_map(&w).unwrap();
            let got = log_map(&r).unwrap();
            let quat = nalgebra::UnitQuaternion::from_matrix(&r).scaled_axis();
            let same = (got - quat).norm().min((got + quat).norm());
            assert!(same <= 1e-6, "axis-angle mismatch {same}");
            let r2 = exp_map(&got).unwrap();
            assert!((r - r2).norm() <= 1e-6, "round trip {}", (r - r2).norm());
        }
    }

    #[test]
    fn log_rejects_non_orthonormal_input() {
        let mut m = Matrix3::identity();
        m[(0, 0)] = 1.5;
        assert!(log_map(&m).is_err());
    }

    #[test]
    fn constant_sequence_encodes_to_zero_increments() {
        let pose = Pose::identity();
        let incs = encode_increments(&[pose; 5]).unwrap();
        assert!(incs.iter().all(|i| i.dp == Vector3::zeros() && i.rotvec == Vector3::zeros()));
    }

    #[test]
    fn pure_translation_encodes_translation_only() {
        let step = Vector3::new(0.01, 0.0, 0.0);
        let poses: Vec<Pose> = (0..4)
            .map(|k| Pose { translation: step * k as f64, rotation: Matrix3::identity() })
            .collect();
        for inc in encode_increments(&poses).unwrap() {
            assert_relative_eq!(inc.dp, step, epsilon = 1e-15);
            assert_eq!(inc.rotvec, Vector3::zeros());
        }
    }

    #[test]
    fn encode_apply_round_trip_on_random_sequences() {
        let mut rng = substream(34, "encdec");
        for _ in 0..100 {
            let mut poses = vec![random_pose(&mut rng)];
            for _ in 0..8 {
                let prev = *poses.last().unwrap();
                let d = Vector3::new(
                    rng.gen_range(-0.01..0.01),
                    rng.gen_range(-0.01..0.01),
                    rng.gen_range(-0.01..0.01),
                );
                let dr = exp_map(&random_rotvec(&mut rng, 0.2)).unwrap();
                poses.push(Pose { translation: prev.translation + d, rotation: dr * prev.rotation });
            }
            let incs = encode_increments(&poses).unwrap();
            let rebuilt = apply_increments(&poses[0], &incs).unwrap();
            for (a, b) in rebuilt.iter().zip(poses[1..].iter()) {
                assert!((a.translation - b.translation).norm() <= 1e-9);
                assert!((a.rotation - b.rotation).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn zero_increments_replicate_the_anchor() {
        let anchor = Pose::identity();
        let out = apply_increments(&anchor, &[PoseIncrement::zero(); 6]).unwrap();
        assert_eq!(out.len(), 6);
        assert!(out.iter().all(|p| *p == anchor));
    }

    #[test]
    fn coaxial_quarter_rotations_compose() {
        let inc = PoseIncrement { dp: Vector3::zeros(), rotvec: Vector3::new(0.0, 0.0, PI / 4.0) };
        let out = apply_increments(&Pose::identity(), &[inc, inc]).unwrap();
        let expect = exp_map(&Vector3::new(0.0, 0.0, PI / 2.0)).unwrap();
        assert!((out[1].rotation - expect).norm() <= 1e-12);
    }

    #[test]
    fn increments_at_or_beyond_pi_are_rejected() {
        let inc = PoseIncrement { dp: Vector3::zeros(), rotvec: Vector3::new(0.0, 0.0, PI) };
        assert!(matches!(
            apply_increments(&Pose::identity(), &[inc]),
            Err(GeomError::IncrementOutOfRange(_))
        ));
    }

    fn cube_cloud() -> PointCloud {
        let mut pts = Vec::new();
        for &x in &[-0.05, 0.05] {
            for &y in &[-0.05, 0.05] {
                for &z in &[-0.05, 0.05] {
                    pts.push(Vector3::new(x, y, z));
                }
            }
        }
        PointCloud::new(pts)
    }

    #[test]
    fn identity_pose_leaves_cloud_unchanged() {
        let cloud = cube_cloud();
        assert_eq!(transform_cloud(&cloud, &Pose::identity()).unwrap(), cloud);
    }

    #[test]
    fn pure_translation_shifts_every_point() {
        let cloud = cube_cloud();
        let p = Vector3::new(0.1, -0.2, 0.3);
        let moved = transform_cloud(&cloud, &Pose { translation: p, rotation: Matrix3::identity() })
            .unwrap();
        for (a, b) in moved.points.iter().zip(cloud.points.iter()) {
            assert_relative_eq!(*a, b + p, epsilon = 1e-15);
        }
    }

    #[test]
    fn rigid_transform_preserves_pairwise_distances() {
        let cloud = cube_cloud();
        let mut rng = substream(35, "rigid");
        let pose = random_pose(&mut rng);
        let moved = transform_cloud(&cloud, &pose).unwrap();
        // Brute-force O(N^2) distance matrix comparison.
        for i in 0..cloud.len() {
            for j in 0..cloud.len() {
                let before = (cloud.points[i] - cloud.points[j]).norm();
                let after = (moved.points[i] - moved.points[j]).norm();
                assert!((before - after).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn adds_is_zero_and_auc_perfect_for_identical_trajectories() {
        let cloud = cube_cloud();
        let mut rng = substream(36, "perfect");
        let traj: Vec<Pose> = (0..10).map(|_| random_pose(&mut rng)).collect();
        let (auc, per_frame) = add_s_auc(&traj, &traj, &cloud, 0.05).unwrap();
        assert_eq!(auc, 100.0);
        assert!(per_frame.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn constant_offset_single_point_matches_step_function_area() {
        // ADD-S = d on every frame; AUC = 100 (d_max - d) / d_max when d
        // falls on the threshold grid.
        let cloud = PointCloud::new(vec![Vector3::zeros()]);
        let gt: Vec<Pose> = (0..7).map(|_| Pose::identity()).collect();
        let pred: Vec<Pose> = gt
            .iter()
            .map(|p| Pose { translation: p.translation + Vector3::new(0.01, 0.0, 0.0), rotation: p.rotation })
            .collect();
        let d_max = 0.05;
        let (auc, per_frame) = add_s_auc(&pred, &gt, &cloud, d_max).unwrap();
        assert!(per_frame.iter().all(|&d| (d - 0.01).abs() < 1e-15));
        assert_relative_eq!(auc, 100.0 * (d_max - 0.01) / d_max, epsilon = 1e-9);
    }

    /// Exhaustive nearest-neighbor oracle with an explicit distance matrix.
    fn add_s_oracle(pred: &Pose, gt: &Pose, cloud: &PointCloud) -> f64 {
        let n = cloud.len();
        let pred_pts: Vec<Vector3<f64>> = cloud.points.iter().map(|q| pred.apply(q)).collect();
        let gt_pts: Vec<Vector3<f64>> = cloud.points.iter().map(|q| gt.apply(q)).collect();
        let mut dist = vec![vec![0.0; n]; n];
        for (i, g) in gt_pts.iter().enumerate() {
            for (j, p) in pred_pts.iter().enumerate() {
                dist[i][j] = (g - p).norm();
            }
        }
        dist.iter().map(|row| row.iter().cloned().fold(f64::INFINITY, f64::min)).sum::<f64>()
            / n as f64
    }

    #[test]
    fn adds_matches_brute_force_oracle() {
        let cloud = cube_cloud();
        let mut rng = substream(37, "oracle");
        for _ in 0..50 {
            let gt = random_pose(&mut rng);
            let mut pred = gt;
            pred.translation += Vector3::new(
                rng.gen_range(-0.01..0.01),
                rng.gen_range(-0.01..0.01),
                rng.gen_range(-0.01..0.01),
            );
            pred.rotation = exp_map(&random_rotvec(&mut rng, 0.1)).unwrap() * pred.rotation;
            let got = add_s_frame(&pred, &gt, &cloud).unwrap();
            let want = add_s_oracle(&pred, &gt, &cloud);
            assert!((got - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn adds_is_invariant_to_cloud_permutation() {
        let cloud = cube_cloud();
        let mut permuted = cloud.points.clone();
        permuted.reverse();
        permuted.swap(1, 5);
        let permuted = PointCloud::new(permuted);
        let mut rng = substream(38, "perm");
        let gt = random_pose(&mut rng);
        let mut pred = gt;
        pred.translation += Vector3::new(0.004, -0.002, 0.001);
        let a = add_s_frame(&pred, &gt, &cloud).unwrap();
        let b = add_s_frame(&pred, &gt, &permuted).unwrap();
        assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn auc_is_monotone_in_dmax() {
        let cloud = cube_cloud();
        let mut rng = substream(39, "mono");
        let gt: Vec<Pose> = (0..12).map(|_| random_pose(&mut rng)).collect();
        let pred: Vec<Pose> = gt
            .iter()
            .map(|p| {
                let mut q = *p;
                q.translation += Vector3::new(
                    rng.gen_range(-0.02..0.02),
                    rng.gen_range(-0.02..0.02),
                    0.0,
                );
                q
            })
            .collect();
        let mut last = 0.0;
        for d_max in [0.01, 0.02, 0.05, 0.1, 0.2] {
            let (auc, _) = add_s_auc(&pred, &gt, &cloud, d_max).unwrap();
            assert!(auc + 1e-12 >= last, "AUC not monotone: {auc} after {last}");
            last = auc;
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let cloud = cube_cloud();
        assert!(add_s_auc(&[], &[], &cloud, 0.1).is_err());
        let t = vec![Pose::identity()];
        assert!(add_s_auc(&t, &t, &cloud, 0.0).is_err());
        assert!(add_s_auc(&t, &t, &cloud, -1.0).is_err());
    }
}
