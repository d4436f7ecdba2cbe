//! Line-oriented text files: intrinsics, trajectories, match queries and results.

use endorecon_core::{CameraIntrinsics, RigidPose, Vec2};

use crate::error::FormatError;

type FResult<T> = std::result::Result<T, FormatError>;

/// Non-empty, non-comment lines with their byte offsets, split into fields.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<(usize, &str)>)> {
    let base = text.as_ptr() as usize;
    text.lines().filter_map(move |line| {
        let body = line.split('#').next().unwrap_or("");
        let fields: Vec<(usize, &str)> =
            body.split_whitespace().map(|f| (f.as_ptr() as usize - base, f)).collect();
        (!fields.is_empty()).then(|| (line.as_ptr() as usize - base, fields))
    })
}

fn number<T: std::str::FromStr>((at, s): (usize, &str)) -> FResult<T> {
    s.parse().map_err(|_| FormatError::new(at, format!("cannot parse `{s}`")))
}

fn arity(at: usize, fields: &[(usize, &str)], n: usize, what: &str) -> FResult<()> {
    if fields.len() != n {
        return Err(FormatError::new(at, format!("{what} line needs {n} fields, found {}", fields.len())));
    }
    Ok(())
}

/// `fx fy cx cy width height` on one line.
pub fn read_intrinsics(text: &str) -> FResult<CameraIntrinsics> {
    let mut recs = records(text);
    let (at, f) = recs.next().ok_or_else(|| FormatError::new(0, "empty intrinsics file"))?;
    arity(at, &f, 6, "intrinsics")?;
    let k = CameraIntrinsics::new(
        number(f[0])?,
        number(f[1])?,
        number(f[2])?,
        number(f[3])?,
        number(f[4])?,
        number(f[5])?,
    )
    .map_err(|e| FormatError::new(at, e.to_string()))?;
    if let Some((at, _)) = recs.next() {
        return Err(FormatError::new(at, "unexpected extra line"));
    }
    Ok(k)
}

pub fn write_intrinsics(k: &CameraIntrinsics) -> String {
    format!("{} {} {} {} {} {}\n", k.fx, k.fy, k.cx, k.cy, k.width, k.height)
}

/// `frame_id tx ty tz qx qy qz qw` per line, camera-to-world.
pub fn read_trajectory(text: &str) -> FResult<Vec<(u32, RigidPose)>> {
    let mut out: Vec<(u32, RigidPose)> = Vec::new();
    for (at, f) in records(text) {
        arity(at, &f, 8, "trajectory")?;
        let id: u32 = number(f[0])?;
        if out.iter().any(|(j, _)| *j == id) {
            return Err(FormatError::new(at, format!("duplicate frame id {id}")));
        }
        let mut v = [0.0; 7];
        for (x, field) in v.iter_mut().zip(&f[1..]) {
            *x = number(*field)?;
        }
        let pose = RigidPose::from_components([v[0], v[1], v[2]], [v[3], v[4], v[5], v[6]])
            .map_err(|e| FormatError::new(at, e.to_string()))?;
        out.push((id, pose));
    }
    Ok(out)
}

pub fn write_trajectory(poses: &[(u32, RigidPose)]) -> String {
    let mut out = String::new();
    for (id, p) in poses {
        let t = p.translation;
        let q = p.rotation.coords; // x, y, z, w
        out += &format!("{id} {} {} {} {} {} {} {}\n", t.x, t.y, t.z, q.x, q.y, q.z, q.w);
    }
    out
}

/// `u v` per line.
pub fn read_queries(text: &str) -> FResult<Vec<Vec2>> {
    records(text)
        .map(|(at, f)| {
            arity(at, &f, 2, "query")?;
            Ok(Vec2::new(number(f[0])?, number(f[1])?))
        })
        .collect()
}

pub fn write_queries(queries: &[Vec2]) -> String {
    queries.iter().map(|q| format!("{} {}\n", q.x, q.y)).collect()
}

/// One match per line: query pixel, refined target pixel, score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchRecord {
    pub query: Vec2,
    pub matched: Vec2,
    pub score: f64,
}

pub fn write_matches(matches: &[MatchRecord]) -> String {
    matches
        .iter()
        .map(|m| format!("{} {} {} {} {}\n", m.query.x, m.query.y, m.matched.x, m.matched.y, m.score))
        .collect()
}

pub fn read_matches(text: &str) -> FResult<Vec<MatchRecord>> {
    records(text)
        .map(|(at, f)| {
            arity(at, &f, 5, "match")?;
            Ok(MatchRecord {
                query: Vec2::new(number(f[0])?, number(f[1])?),
                matched: Vec2::new(number(f[2])?, number(f[3])?),
                score: number(f[4])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use endorecon_core::Vec3;
    use nalgebra::UnitQuaternion;

    #[test]
    fn intrinsics_round_trip() {
        let k = CameraIntrinsics::new(160.5, 161.0, 159.5, 127.25, 320, 256).unwrap();
        assert_eq!(read_intrinsics(&write_intrinsics(&k)).unwrap(), k);
        let err = read_intrinsics("# camera\n1 2 3\n").unwrap_err();
        assert_eq!(err.offset, 9);
        assert!(read_intrinsics("1 1 5 5 4 4\n").is_err(), "principal point outside the image");
    }

    #[test]
    fn trajectory_round_trip() {
        let poses: Vec<(u32, RigidPose)> = (0..5)
            .map(|i| {
                let q = UnitQuaternion::from_euler_angles(0.1 * i as f64, -0.3, 0.7);
                (i * 2, RigidPose::new(q, Vec3::new(i as f64, 1.0 / 3.0, -2.5)))
            })
            .collect();
        let back = read_trajectory(&write_trajectory(&poses)).unwrap();
        for ((i, a), (j, b)) in poses.iter().zip(&back) {
            assert_eq!(i, j);
            assert_eq!(a.translation, b.translation);
            assert!(a.rotation.angle_to(&b.rotation) < 1e-12);
        }
    }

    #[test]
    fn trajectory_errors_point_at_the_field() {
        let text = "0 0 0 0 0 0 0 1\n1 0 0 x 0 0 0 1\n";
        assert_eq!(read_trajectory(text).unwrap_err().offset, 22);
        assert_eq!(read_trajectory("0 0 0 0 0 0 0 1\n0 0 0 0 0 0 0 1\n").unwrap_err().offset, 16);
        assert!(read_trajectory("0 0 0 0 0 0 0 0\n").is_err());
    }

    #[test]
    fn queries_and_matches() {
        assert!(read_queries("").unwrap().is_empty());
        let q = vec![Vec2::new(3.0, 4.5), Vec2::new(0.0, 1.0)];
        assert_eq!(read_queries(&write_queries(&q)).unwrap(), q);
        let m = vec![MatchRecord { query: q[0], matched: Vec2::new(6.25, 3.0), score: 0.875 }];
        assert_eq!(read_matches(&write_matches(&m)).unwrap(), m);
    }
}
