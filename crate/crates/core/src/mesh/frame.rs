use num_complex::Complex64;

use super::{FaceId, HalfEdgeMesh, Vec3};

/// Orthonormal tangent frame of a face with the corners in local complex
/// coordinates. Corner 0 sits at the origin and corner 1 on the positive real
/// axis, so the face is counter-clockwise in the local plane.
#[derive(Debug, Clone)]
pub struct FaceFrame {
    pub corners: [Vec3; 3],
    pub e1: Vec3,
    pub e2: Vec3,
    pub normal: Vec3,
    pub z: [Complex64; 3],
    pub area: f64,
}

impl FaceFrame {
    pub(super) fn new(mesh: &HalfEdgeMesh, f: FaceId) -> Self {
        let corners = mesh.face_corners(f);
        let d1 = corners[1] - corners[0];
        let d2 = corners[2] - corners[0];
        let cross = d1.cross(&d2);
        let double_area = cross.norm();
        let normal = if double_area > 0.0 {
            cross / double_area
        } else {
            Vec3::z()
        };
        let len1 = d1.norm();
        let e1 = if len1 > 0.0 { d1 / len1 } else { Vec3::x() };
        let e2 = normal.cross(&e1);
        let z = [
            Complex64::new(0.0, 0.0),
            Complex64::new(len1, 0.0),
            Complex64::new(d2.dot(&e1), d2.dot(&e2)),
        ];
        FaceFrame {
            corners,
            e1,
            e2,
            normal,
            z,
            area: 0.5 * double_area,
        }
    }

    /// Local coordinate of the edge vector carried by corner `i` → corner `i+1`.
    pub fn edge(&self, i: usize) -> Complex64 {
        self.z[(i + 1) % 3] - self.z[i]
    }

    pub fn to_ambient(&self, z: Complex64) -> Vec3 {
        self.corners[0] + self.e1 * z.re + self.e2 * z.im
    }

    pub fn to_local(&self, p: Vec3) -> Complex64 {
        let d = p - self.corners[0];
        Complex64::new(d.dot(&self.e1), d.dot(&self.e2))
    }

    pub fn from_barycentric(&self, b: [f64; 3]) -> Complex64 {
        self.z[0] * b[0] + self.z[1] * b[1] + self.z[2] * b[2]
    }

    pub fn barycentric(&self, z: Complex64) -> [f64; 3] {
        let cross = |a: Complex64, b: Complex64| a.re * b.im - a.im * b.re;
        let total = cross(self.z[1] - self.z[0], self.z[2] - self.z[0]);
        let b1 = cross(z - self.z[0], self.z[2] - self.z[0]) / total;
        let b2 = cross(self.z[1] - self.z[0], z - self.z[0]) / total;
        [1.0 - b1 - b2, b1, b2]
    }

    /// Per-face constant vector (in local coordinates) of a closed real
    /// one-form given its values on edges 0→1 and 0→2.
    pub fn vector_from_edges(&self, w01: f64, w02: f64) -> Complex64 {
        // u · z1 = w01, u · z2 = w02 with z1 real.
        let z1 = self.z[1].re;
        let ux = w01 / z1;
        let uy = (w02 - ux * self.z[2].re) / self.z[2].im;
        Complex64::new(ux, uy)
    }

    /// Splits complex edge values into c·dz + d·dz̄ on this face.
    pub fn complex_coefficients(&self, w01: Complex64, w02: Complex64) -> (Complex64, Complex64) {
        // c z1 + d z1 = w01 (z1 real), c z2 + d conj(z2) = w02
        let z1 = self.z[1].re;
        let z2 = self.z[2];
        let s = w01 / z1; // c + d
                          // c z2 + (s - c) conj(z2) = w02  =>  c (z2 - conj z2) = w02 - s conj z2
        let c = (w02 - s * z2.conj()) / (z2 - z2.conj());
        (c, s - c)
    }
}
