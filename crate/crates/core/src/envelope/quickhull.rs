//! Lower hull of a lifted planar point cloud by incremental quickhull with
//! exact orientation predicates.

use std::collections::HashMap;

use robust::{orient2d, orient3d, Coord, Coord3D};

#[inline]
fn c3(p: &[f64; 3]) -> Coord3D<f64> {
    Coord3D {
        x: p[0],
        y: p[1],
        z: p[2],
    }
}

#[inline]
fn c2(p: &[f64; 3]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

/// Positive iff `d` lies on the outer side of the oriented face `(a, b, c)`.
#[inline]
fn side(pts: &[[f64; 3]], f: &[usize; 3], d: usize) -> f64 {
    orient3d(c3(&pts[f[0]]), c3(&pts[f[1]]), c3(&pts[f[2]]), c3(&pts[d]))
}

#[inline]
pub(crate) fn ccw(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    orient2d(c2(a), c2(b), c2(c))
}

struct Face {
    v: [usize; 3],
    /// `nb[e]` is the face across the directed edge `v[e] -> v[e+1]`.
    nb: [usize; 3],
    outside: Vec<usize>,
    alive: bool,
    stamp: usize,
    visible: bool,
}

fn link(faces: &mut [Face], ids: &[usize]) {
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for &f in ids {
        for e in 0..3 {
            edges.insert((faces[f].v[e], faces[f].v[(e + 1) % 3]), f);
        }
    }
    for &f in ids {
        for e in 0..3 {
            let (a, b) = (faces[f].v[e], faces[f].v[(e + 1) % 3]);
            if let Some(&g) = edges.get(&(b, a)) {
                faces[f].nb[e] = g;
            }
        }
    }
}

fn initial_simplex(pts: &[[f64; 3]]) -> Option<[usize; 4]> {
    let n = pts.len();
    if n < 4 {
        return None;
    }
    let i0 = (0..n).min_by(|&a, &b| pts[a].partial_cmp(&pts[b]).unwrap())?;
    let d2 = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>();
    let i1 = (0..n).max_by(|&a, &b| d2(&pts[a], &pts[i0]).total_cmp(&d2(&pts[b], &pts[i0])))?;
    if d2(&pts[i1], &pts[i0]) == 0.0 {
        return None;
    }
    let cross2 = |p: &[f64; 3]| {
        let u = [
            pts[i1][0] - pts[i0][0],
            pts[i1][1] - pts[i0][1],
            pts[i1][2] - pts[i0][2],
        ];
        let w = [p[0] - pts[i0][0], p[1] - pts[i0][1], p[2] - pts[i0][2]];
        let c = [
            u[1] * w[2] - u[2] * w[1],
            u[2] * w[0] - u[0] * w[2],
            u[0] * w[1] - u[1] * w[0],
        ];
        c[0] * c[0] + c[1] * c[1] + c[2] * c[2]
    };
    let i2 = (0..n).max_by(|&a, &b| cross2(&pts[a]).total_cmp(&cross2(&pts[b])))?;
    if cross2(&pts[i2]) == 0.0 {
        return None;
    }
    let f = [i0, i1, i2];
    let i3 = (0..n).max_by(|&a, &b| side(pts, &f, a).abs().total_cmp(&side(pts, &f, b).abs()))?;
    if side(pts, &f, i3) == 0.0 {
        return None;
    }
    Some([i0, i1, i2, i3])
}

/// Faces of the lower hull, each ordered counterclockwise in the plane.
/// Returns `None` when all lifted points are coplanar.
pub(crate) fn lower_hull(pts: &[[f64; 3]]) -> Option<Vec<[usize; 3]>> {
    let simplex = initial_simplex(pts)?;
    let mut faces: Vec<Face> = Vec::new();
    for (a, b, c, other) in [(0, 1, 2, 3), (0, 1, 3, 2), (0, 2, 3, 1), (1, 2, 3, 0)] {
        let mut v = [simplex[a], simplex[b], simplex[c]];
        if side(pts, &v, simplex[other]) > 0.0 {
            v.swap(1, 2);
        }
        faces.push(Face {
            v,
            nb: [usize::MAX; 3],
            outside: Vec::new(),
            alive: true,
            stamp: 0,
            visible: false,
        });
    }
    link(&mut faces, &[0, 1, 2, 3]);
    for p in 0..pts.len() {
        if simplex.contains(&p) {
            continue;
        }
        if let Some(f) = (0..4).find(|&f| side(pts, &faces[f].v, p) > 0.0) {
            faces[f].outside.push(p);
        }
    }
    let mut stack: Vec<usize> = (0..4).filter(|&f| !faces[f].outside.is_empty()).collect();
    let mut round = 0usize;
    while let Some(start) = stack.pop() {
        if !faces[start].alive || faces[start].outside.is_empty() {
            continue;
        }
        round += 1;
        let eye = {
            let f = &faces[start];
            *f.outside
                .iter()
                .max_by(|&&a, &&b| side(pts, &f.v, a).total_cmp(&side(pts, &f.v, b)))
                .unwrap()
        };
        let mut visible = vec![start];
        faces[start].stamp = round;
        faces[start].visible = true;
        let mut horizon: Vec<(usize, usize, usize)> = Vec::new();
        let mut qi = 0;
        while qi < visible.len() {
            let f = visible[qi];
            qi += 1;
            for e in 0..3 {
                let g = faces[f].nb[e];
                if faces[g].stamp != round {
                    faces[g].stamp = round;
                    faces[g].visible = side(pts, &faces[g].v, eye) > 0.0;
                    if faces[g].visible {
                        visible.push(g);
                    }
                }
                if !faces[g].visible {
                    horizon.push((faces[f].v[e], faces[f].v[(e + 1) % 3], g));
                }
            }
        }
        let mut by_start: HashMap<usize, usize> = HashMap::with_capacity(horizon.len());
        let mut by_end: HashMap<usize, usize> = HashMap::with_capacity(horizon.len());
        let mut new_ids = Vec::with_capacity(horizon.len());
        for &(a, b, g) in &horizon {
            let id = faces.len();
            faces.push(Face {
                v: [a, b, eye],
                nb: [g, usize::MAX, usize::MAX],
                outside: Vec::new(),
                alive: true,
                stamp: 0,
                visible: false,
            });
            for e in 0..3 {
                if faces[g].v[e] == b && faces[g].v[(e + 1) % 3] == a {
                    faces[g].nb[e] = id;
                }
            }
            by_start.insert(a, id);
            by_end.insert(b, id);
            new_ids.push(id);
        }
        for &id in &new_ids {
            let [a, b, _] = faces[id].v;
            faces[id].nb[1] = by_start[&b];
            faces[id].nb[2] = by_end[&a];
        }
        let mut orphans = Vec::new();
        for &f in &visible {
            faces[f].alive = false;
            orphans.append(&mut faces[f].outside);
        }
        for p in orphans {
            if p == eye {
                continue;
            }
            if let Some(&f) = new_ids.iter().find(|&&f| side(pts, &faces[f].v, p) > 0.0) {
                faces[f].outside.push(p);
            }
        }
        for &id in &new_ids {
            if !faces[id].outside.is_empty() {
                stack.push(id);
            }
        }
    }
    Some(
        faces
            .iter()
            .filter(|f| f.alive && ccw(&pts[f.v[0]], &pts[f.v[1]], &pts[f.v[2]]) > 0.0)
            .map(|f| f.v)
            .collect(),
    )
}
