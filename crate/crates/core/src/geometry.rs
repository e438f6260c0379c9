//! Rigid and similarity transforms, closed-form point-set alignment and
//! pinhole projection.
//!
//! Conventions: a [`Pose`] is world-from-camera (`p_world = R * p_cam + t`),
//! camera frames have +z forward, +x right and +y down, and a [`Sim3`] maps
//! `p -> s * R * p + t`.

use nalgebra::{Matrix3, Matrix3xX, Matrix4, Quaternion, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Camera-frame depth at or below which a point counts as behind the camera.
pub const MIN_DEPTH: f64 = 1e-6;

/// Relative singular-value threshold below which a point set is treated as
/// collinear.
pub const DEGENERACY_RATIO: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("point is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("invalid camera model: {0}")]
    InvalidCamera(&'static str),
    #[error("invalid similarity transform: {0}")]
    InvalidTransform(&'static str),
}

/// 7-DoF similarity transform `p -> s * R * p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Sim3Repr", into = "Sim3Repr")]
pub struct Sim3 {
    scale: f64,
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct Sim3Repr {
    scale: f64,
    /// Unit quaternion as (w, x, y, z).
    rotation: [f64; 4],
    translation: [f64; 3],
}

impl From<Sim3> for Sim3Repr {
    fn from(s: Sim3) -> Self {
        Sim3Repr {
            scale: s.scale,
            rotation: quat_to_wxyz(&s.rotation),
            translation: s.translation.into(),
        }
    }
}

impl TryFrom<Sim3Repr> for Sim3 {
    type Error = GeometryError;

    fn try_from(r: Sim3Repr) -> Result<Self, Self::Error> {
        Sim3::new(r.scale, quat_from_wxyz(r.rotation)?, Vector3::from(r.translation))
    }
}

impl Default for Sim3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Sim3 {
    pub fn new(scale: f64, rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GeometryError::InvalidTransform("scale must be positive and finite"));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidTransform("translation must be finite"));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            translation: t,
            ..Self::identity()
        }
    }

    pub fn from_scale(scale: f64) -> Result<Self, GeometryError> {
        Self::new(scale, UnitQuaternion::identity(), Vector3::zeros())
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Sim3) -> Sim3 {
        Sim3 {
            scale: self.scale * other.scale,
            rotation: renormalize(self.rotation * other.rotation),
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Sim3 {
        let inv_rot = self.rotation.inverse();
        let inv_scale = 1.0 / self.scale;
        Sim3 {
            scale: inv_scale,
            rotation: inv_rot,
            translation: -(inv_scale * (inv_rot * self.translation)),
        }
    }

    /// Partial transform at fraction `alpha`: geodesic on scale and rotation,
    /// linear on translation. `alpha = 0` is the identity, `alpha = 1` is `self`.
    pub fn interpolate(&self, alpha: f64) -> Sim3 {
        Sim3 {
            scale: self.scale.powf(alpha),
            rotation: UnitQuaternion::identity()
                .try_slerp(&self.rotation, alpha, 1e-12)
                .unwrap_or_else(|| self.rotation.powf(alpha)),
            translation: self.translation * alpha,
        }
    }

    /// Re-expresses a world-from-camera pose after mapping the world by `self`.
    pub fn transform_pose(&self, pose: &Pose) -> Pose {
        Pose {
            rotation: renormalize(self.rotation * pose.rotation),
            translation: self.apply(&pose.translation),
        }
    }

    /// Componentwise deviation from `other`: |Δs|, max |ΔR_ij|, max |Δt_i|.
    pub fn deviation(&self, other: &Sim3) -> Sim3Deviation {
        Sim3Deviation {
            scale: (self.scale - other.scale).abs(),
            rotation: (self.rotation_matrix() - other.rotation_matrix()).abs().max(),
            translation: (self.translation - other.translation).abs().max(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sim3Deviation {
    pub scale: f64,
    pub rotation: f64,
    pub translation: f64,
}

impl Sim3Deviation {
    pub fn max(&self) -> f64 {
        self.scale.max(self.rotation).max(self.translation)
    }
}

/// World-from-camera rigid pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    rotation: [f64; 4],
    translation: [f64; 3],
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        PoseRepr {
            rotation: quat_to_wxyz(&p.rotation),
            translation: p.translation.into(),
        }
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = GeometryError;

    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        Ok(Pose::new(quat_from_wxyz(r.rotation)?, Vector3::from(r.translation)))
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::identity(), Vector3::zeros())
    }

    /// Builds a pose from a rotation matrix; fails unless it is a proper rotation.
    pub fn from_matrix(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if (rotation.transpose() * rotation - Matrix3::identity()).abs().max() > 1e-9
            || (rotation.determinant() - 1.0).abs() > 1e-9
        {
            return Err(GeometryError::InvalidTransform(
                "rotation is not orthonormal with det +1",
            ));
        }
        let rot = nalgebra::Rotation3::from_matrix_unchecked(*rotation);
        Ok(Self::new(UnitQuaternion::from_rotation_matrix(&rot), translation))
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Camera center in world coordinates.
    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn world_to_camera(&self, p_world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&(p_world - self.translation))
    }

    pub fn camera_to_world(&self, p_cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p_cam + self.translation
    }

    /// Viewing direction (+z of the camera) in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation * Vector3::z()
    }

    /// Angle in degrees between the viewing directions of two poses.
    pub fn viewing_angle_deg(&self, other: &Pose) -> f64 {
        self.forward().angle(&other.forward()).to_degrees()
    }
}

/// Pinhole intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraRepr", into = "CameraRepr")]
pub struct CameraModel {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct CameraRepr {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl From<CameraModel> for CameraRepr {
    fn from(c: CameraModel) -> Self {
        CameraRepr {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
        }
    }
}

impl TryFrom<CameraRepr> for CameraModel {
    type Error = GeometryError;

    fn try_from(r: CameraRepr) -> Result<Self, Self::Error> {
        CameraModel::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(GeometryError::InvalidCamera("focal lengths must be positive"));
        }
        if !(0.0..f64::from(width)).contains(&cx) || !(0.0..f64::from(height)).contains(&cy) {
            return Err(GeometryError::InvalidCamera("principal point outside the image"));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn contains(&self, px: &Vector2<f64>) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x < f64::from(self.width) && px.y < f64::from(self.height)
    }

    /// Projects a camera-frame point.
    pub fn project_camera(&self, p_cam: &Vector3<f64>) -> Result<Vector2<f64>, GeometryError> {
        if p_cam.z <= MIN_DEPTH {
            return Err(GeometryError::BehindCamera { depth: p_cam.z });
        }
        Ok(Vector2::new(
            self.fx * p_cam.x / p_cam.z + self.cx,
            self.fy * p_cam.y / p_cam.z + self.cy,
        ))
    }

    /// Back-projects a pixel to the camera-frame point at the given depth.
    pub fn unproject_camera(&self, px: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (px.x - self.cx) / self.fx * depth,
            (px.y - self.cy) / self.fy * depth,
            depth,
        )
    }
}

/// Projects a world point through a posed camera.
pub fn project(cam: &CameraModel, pose: &Pose, p_world: &Vector3<f64>) -> Result<Vector2<f64>, GeometryError> {
    cam.project_camera(&pose.world_to_camera(p_world))
}

/// Back-projects a pixel at camera-frame depth `depth` into world coordinates.
pub fn unproject(cam: &CameraModel, pose: &Pose, px: &Vector2<f64>, depth: f64) -> Vector3<f64> {
    pose.camera_to_world(&cam.unproject_camera(px, depth))
}

/// Closed-form least-squares similarity alignment (Horn's unit-quaternion
/// method) with uniform weights and the symmetric scale estimate.
///
/// Returns `S` such that `dst[k] ≈ S(src[k])`.
pub fn horn_sim3(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<Sim3, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::DegenerateConfiguration("point lists differ in length"));
    }
    if src.len() < 3 {
        return Err(GeometryError::DegenerateConfiguration("fewer than 3 correspondences"));
    }
    let n = src.len() as f64;
    let src_mean = src.iter().sum::<Vector3<f64>>() / n;
    let dst_mean = dst.iter().sum::<Vector3<f64>>() / n;
    let a = Matrix3xX::from_columns(&src.iter().map(|p| p - src_mean).collect::<Vec<_>>());
    let b = Matrix3xX::from_columns(&dst.iter().map(|p| p - dst_mean).collect::<Vec<_>>());
    check_spread(&a, "source points are collinear or coincident")?;
    check_spread(&b, "target points are collinear or coincident")?;

    let m = &a * b.transpose();
    let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    #[rustfmt::skip]
    let nmat = Matrix4::new(
        sxx + syy + szz, syz - szy,        szx - sxz,        sxy - syx,
        syz - szy,       sxx - syy - szz,  sxy + syx,        szx + sxz,
        szx - sxz,       sxy + syx,        -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,        syz + szy,        -sxx - syy + szz,
    );
    let eig = nmat.symmetric_eigen();
    let best = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(best);
    let rotation = UnitQuaternion::from_quaternion(Quaternion::new(v[0], v[1], v[2], v[3]));

    let scale = (b.norm_squared() / a.norm_squared()).sqrt();
    let translation = dst_mean - scale * (rotation * src_mean);
    Sim3::new(scale, rotation, translation)
}

fn check_spread(centered: &Matrix3xX<f64>, what: &'static str) -> Result<(), GeometryError> {
    // Rank < 2 means collinear: the second singular value vanishes.
    let mut sv: Vec<f64> = centered
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    if sv[0] <= 0.0 || sv[1] < DEGENERACY_RATIO * sv[0] {
        return Err(GeometryError::DegenerateConfiguration(what));
    }
    Ok(())
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}

pub(crate) fn quat_to_wxyz(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

pub(crate) fn quat_from_wxyz(q: [f64; 4]) -> Result<UnitQuaternion<f64>, GeometryError> {
    let raw = Quaternion::new(q[0], q[1], q[2], q[3]);
    let norm = raw.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
        return Err(GeometryError::InvalidTransform("quaternion is not unit length"));
    }
    // Already-unit input is kept bit-exact so that serialization round-trips.
    Ok(UnitQuaternion::new_unchecked(raw))
}

/// Rotation about +z by `angle` radians.
pub fn rot_z(angle: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    fn triangle() -> Vec<Vector3<f64>> {
        vec![v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0)]
    }

    #[test]
    fn horn_identity_on_equal_sets() {
        let s = horn_sim3(&triangle(), &triangle()).unwrap();
        assert!(s.deviation(&Sim3::identity()).max() < 1e-12);
    }

    #[test]
    fn horn_recovers_known_transform() {
        let truth = Sim3::new(2.0, rot_z(FRAC_PI_2), v(1.0, 0.0, 0.0)).unwrap();
        let dst: Vec<_> = triangle().iter().map(|p| truth.apply(p)).collect();
        let s = horn_sim3(&triangle(), &dst).unwrap();
        assert!(s.deviation(&truth).max() < 1e-9, "{:?}", s.deviation(&truth));
    }

    #[test]
    fn horn_rejects_collinear_and_short_inputs() {
        let line = vec![v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(2.0, 0.0, 0.0)];
        assert!(matches!(
            horn_sim3(&line, &line),
            Err(GeometryError::DegenerateConfiguration(_))
        ));
        let two = &triangle()[..2];
        assert!(matches!(
            horn_sim3(two, two),
            Err(GeometryError::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn apply_examples() {
        assert_eq!(Sim3::identity().apply(&v(1.0, 2.0, 3.0)), v(1.0, 2.0, 3.0));
        assert_eq!(
            Sim3::from_scale(2.0).unwrap().apply(&v(1.0, 0.0, 0.0)),
            v(2.0, 0.0, 0.0)
        );
        let s = Sim3::new(1.0, rot_z(FRAC_PI_2), v(1.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(s.apply(&v(1.0, 0.0, 0.0)), v(1.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn compose_and_inverse_examples() {
        let s = Sim3::new(1.7, rot_z(0.3), v(0.2, -1.0, 4.0)).unwrap();
        assert!(Sim3::identity().compose(&s).deviation(&s).max() < 1e-15);
        assert!(s.compose(&s.inverse()).deviation(&Sim3::identity()).max() < 1e-12);
        let six = Sim3::from_scale(2.0).unwrap().compose(&Sim3::from_scale(3.0).unwrap());
        assert_eq!(six.scale(), 6.0);
        assert!(six.deviation(&Sim3::from_scale(6.0).unwrap()).max() < 1e-15);
    }

    #[test]
    fn project_examples() {
        let cam = CameraModel::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let id = Pose::identity();
        assert_eq!(
            project(&cam, &id, &v(0.0, 0.0, 1.0)).unwrap(),
            Vector2::new(320.0, 240.0)
        );
        assert_abs_diff_eq!(
            project(&cam, &id, &v(0.1, 0.0, 1.0)).unwrap(),
            Vector2::new(370.0, 240.0),
            epsilon = 1e-12
        );
        assert!(matches!(
            project(&cam, &id, &v(0.0, 0.0, -1.0)),
            Err(GeometryError::BehindCamera { .. })
        ));
    }

    #[test]
    fn camera_validation() {
        assert!(CameraModel::new(0.0, 1.0, 1.0, 1.0, 10, 10).is_err());
        assert!(CameraModel::new(1.0, 1.0, 10.0, 1.0, 10, 10).is_err());
    }

    #[test]
    fn interpolation_endpoints() {
        let s = Sim3::new(1.3, rot_z(0.4), v(1.0, 2.0, 3.0)).unwrap();
        assert!(s.interpolate(0.0).deviation(&Sim3::identity()).max() < 1e-12);
        assert!(s.interpolate(1.0).deviation(&s).max() < 1e-12);
        let half = s.interpolate(0.5);
        assert!(half.compose(&half).rotation().angle_to(s.rotation()) < 1e-12);
    }

    #[test]
    fn serde_is_bit_exact() {
        let s = Sim3::new(1.234567891, rot_z(0.123456789), v(0.1, 0.2, 0.3)).unwrap();
        let back: Sim3 = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    fn arb_sim3() -> impl Strategy<Value = Sim3> {
        (
            0.1f64..10.0,
            prop::array::uniform3(-1.0f64..1.0),
            -3.1f64..3.1,
            prop::array::uniform3(-10.0f64..10.0),
        )
            .prop_filter_map("axis", |(s, axis, angle, t)| {
                let axis = nalgebra::Unit::try_new(Vector3::from(axis), 1e-3)?;
                Sim3::new(s, UnitQuaternion::from_axis_angle(&axis, angle), Vector3::from(t)).ok()
            })
    }

    fn arb_point() -> impl Strategy<Value = Vector3<f64>> {
        prop::array::uniform3(-5.0f64..5.0).prop_map(Vector3::from)
    }

    proptest! {
        #[test]
        fn compose_matches_sequential_apply(a in arb_sim3(), b in arb_sim3(), p in arb_point()) {
            let lhs = a.compose(&b).apply(&p);
            let rhs = a.apply(&b.apply(&p));
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }

        #[test]
        fn horn_is_exact_and_order_invariant(
            truth in arb_sim3(),
            pts in prop::collection::vec(arb_point(), 3..12),
        ) {
            let dst: Vec<_> = pts.iter().map(|p| truth.apply(p)).collect();
            match horn_sim3(&pts, &dst) {
                Ok(s) => {
                    prop_assert!(s.deviation(&truth).max() < 1e-9);
                    let mut rs = pts.clone();
                    let mut rd = dst.clone();
                    rs.reverse();
                    rd.reverse();
                    let r = horn_sim3(&rs, &rd).unwrap();
                    prop_assert!(r.deviation(&s).max() < 1e-9);
                }
                Err(GeometryError::DegenerateConfiguration(_)) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn unproject_then_project_round_trips(
            u in 0.0f64..640.0, vv in 0.0f64..480.0, depth in 0.1f64..50.0,
            t in arb_point(), angle in -3.0f64..3.0,
        ) {
            let cam = CameraModel::new(500.0, 480.0, 320.0, 240.0, 640, 480).unwrap();
            let pose = Pose::new(rot_z(angle), t);
            let px = Vector2::new(u, vv);
            let back = project(&cam, &pose, &unproject(&cam, &pose, &px, depth)).unwrap();
            prop_assert!((back - px).norm() < 1e-9);
        }
    }
}
