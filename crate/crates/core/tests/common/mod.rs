#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dpmpqp::model::Polytope;
use dpmpqp::plot::polygon_vertices;
use dpmpqp::regions::PwaLaw;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform samples from a bounded polytope by rejection from its bounding box.
pub fn sample_polytope(p: &Polytope, count: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let (lo, hi) = p.bounding_box().unwrap().expect("bounded, nonempty polytope");
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = DVector::from_fn(lo.len(), |i, _| rng.gen_range(lo[i]..=hi[i]));
        if p.contains(&x, 0.0) {
            out.push(x);
        }
    }
    out
}

/// Solves `P = Acl' P Acl + W` by vectorization.
fn lyapunov(acl: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = acl.nrows();
    let kron = acl.transpose().kronecker(&acl.transpose());
    let lhs = DMatrix::identity(n * n, n * n) - kron;
    let rhs = DVector::from_column_slice(w.as_slice());
    let p = lhs.lu().solve(&rhs).expect("stable closed loop");
    let p = DMatrix::from_column_slice(n, n, p.as_slice());
    (&p + p.transpose()) * 0.5
}

/// Hewer's policy iteration from a stabilizing gain `k0` (`u = K x`).
pub fn hewer_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    k0: DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut k = k0;
    let mut p = DMatrix::zeros(a.nrows(), a.nrows());
    for _ in 0..100 {
        let acl = a + b * &k;
        let next = lyapunov(&acl, &(q + k.transpose() * r * &k));
        let s = r + b.transpose() * &next * b;
        k = -s.clone().try_inverse().unwrap() * b.transpose() * &next * a;
        let done = (&next - &p).norm() <= 1e-14 * next.norm();
        p = next;
        if done {
            break;
        }
    }
    (p, k)
}

pub fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let s = r + b.transpose() * p * b;
    let rhs = q + a.transpose() * p * a - a.transpose() * p * b * s.try_inverse().unwrap() * b.transpose() * p * a;
    (p - rhs).norm()
}

/// A facet shared by two regions, given by two endpoints.
#[derive(Clone, Debug)]
pub struct SharedFacet {
    pub left: usize,
    pub right: usize,
    pub from: (f64, f64),
    pub to: (f64, f64),
}

/// Pairs of planar regions sharing an edge of positive length.
pub fn adjacent_pairs(law: &PwaLaw) -> Vec<SharedFacet> {
    assert_eq!(law.n, 2);
    let polys: Vec<Vec<(f64, f64)>> = law
        .regions
        .iter()
        .map(|r| polygon_vertices(r.polytope.c(), r.polytope.d()))
        .collect();
    let mut out = Vec::new();
    for (i, verts) in polys.iter().enumerate() {
        for e in 0..verts.len() {
            let (p, q) = (verts[e], verts[(e + 1) % verts.len()]);
            if (p.0 - q.0).hypot(p.1 - q.1) < 1e-6 {
                continue;
            }
            let inside = |t: f64, j: usize| {
                let z = DVector::from_vec(vec![p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)]);
                law.regions[j].polytope.contains(&z, 1e-7)
            };
            for j in i + 1..law.regions.len() {
                // portion of the edge inside region j, found by bisection from an interior hit
                let Some(t0) = (1..20).map(|k| k as f64 / 20.0).find(|&t| inside(t, j)) else {
                    continue;
                };
                let (mut lo, mut hi) = (0.0, t0);
                if !inside(0.0, j) {
                    for _ in 0..50 {
                        let mid = 0.5 * (lo + hi);
                        if inside(mid, j) {
                            hi = mid
                        } else {
                            lo = mid
                        }
                    }
                    lo = hi;
                }
                let (mut a, mut bnd) = (t0, 1.0);
                if !inside(1.0, j) {
                    for _ in 0..50 {
                        let mid = 0.5 * (a + bnd);
                        if inside(mid, j) {
                            a = mid
                        } else {
                            bnd = mid
                        }
                    }
                    bnd = a;
                }
                let from = (p.0 + lo * (q.0 - p.0), p.1 + lo * (q.1 - p.1));
                let to = (p.0 + bnd * (q.0 - p.0), p.1 + bnd * (q.1 - p.1));
                if (from.0 - to.0).hypot(from.1 - to.1) > 1e-6 {
                    out.push(SharedFacet {
                        left: i,
                        right: j,
                        from,
                        to,
                    });
                }
            }
        }
    }
    out
}

/// Largest deviation between the two affine laws of a shared facet over `points` random points.
pub fn facet_gap(law: &PwaLaw, f: &SharedFacet, points: usize, rng: &mut ChaCha8Rng) -> f64 {
    (0..points)
        .map(|_| {
            let t: f64 = rng.gen();
            let x = DVector::from_vec(vec![
                f.from.0 + t * (f.to.0 - f.from.0),
                f.from.1 + t * (f.to.1 - f.from.1),
            ]);
            (law.regions[f.left].control(&x) - law.regions[f.right].control(&x)).amax()
        })
        .fold(0.0, f64::max)
}

/// DP solution and explicit law for the double integrator with horizon cap `n_max`.
pub fn dp_law(n_max: usize) -> (dpmpqp::enumeration::DpResult, PwaLaw) {
    let ocp = dpmpqp::model::double_integrator();
    let dp = dpmpqp::enumeration::alg4_dp(&ocp, n_max, dpmpqp::enumeration::Schedule::Parallel).unwrap();
    let law = dpmpqp::regions::build_pwa(&dp.qp, &dp.explicit).unwrap();
    (dp, law)
}

/// Largest deviation between the law and the first input of the online QP at `states`.
pub fn qp_deviation(qp: &dpmpqp::condense::CondensedQp, law: &PwaLaw, states: &[DVector<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for x in states {
        let sol = dpmpqp::qp::solve_qp(qp, x)
            .unwrap()
            .expect("sampled states are feasible");
        worst = match law.evaluate(x) {
            Some(u) => worst.max((u - sol.first_input(law.m)).amax()),
            None => f64::INFINITY,
        };
    }
    worst
}
