//! Small spherical-geometry kernel shared by the mesh builder and the
//! analytic test fields. All helpers work on the unit sphere unless a radius
//! is passed explicitly.

pub use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// Great-circle angle between two unit vectors, stable for tiny and
/// near-antipodal separations.
pub fn arc_angle(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Area of the spherical triangle spanned by three unit vectors.
pub fn spherical_triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let triple = a.dot(&(b - a).cross(&(c - a))).abs();
    let denom = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * triple.atan2(denom)
}

/// Point on the unit sphere equidistant from `a`, `b`, `c`, on the same side
/// as the triangle.
pub fn spherical_circumcenter(a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let n = (b - a).cross(&(c - a)).normalize();
    if n.dot(&(a + b + c)) < 0.0 {
        -n
    } else {
        n
    }
}

/// Removes the component of `v` along the unit vector `r`.
pub fn tangent_part(v: &Vec3, r: &Vec3) -> Vec3 {
    v - r * r.dot(v)
}

/// Latitude and longitude (radians) of a point.
pub fn lat_lon(p: &Vec3) -> (f64, f64) {
    let r = p.norm();
    ((p.z / r).clamp(-1.0, 1.0).asin(), p.y.atan2(p.x))
}

pub fn from_lat_lon(lat: f64, lon: f64) -> Vec3 {
    Vec3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
}

/// Unit eastward vector at a point; zero at the poles.
pub fn east(p: &Vec3) -> Vec3 {
    let e = Vec3::z().cross(p);
    let n = e.norm();
    if n < 1e-300 {
        Vec3::zeros()
    } else {
        e / n
    }
}

/// Unit northward vector at a point; zero at the poles.
pub fn north(p: &Vec3) -> Vec3 {
    let r = p.normalize();
    let e = east(&r);
    r.cross(&e)
}
