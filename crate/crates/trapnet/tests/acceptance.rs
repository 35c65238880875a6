//! Acceptance gate for the crate: nine numbered criteria, one test (and one
//! pass/fail line in the harness output) per criterion. Each criterion is
//! checked against closed forms or brute-force oracles built inside this
//! file, independent of the library code paths under test.

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trapnet::analysis::{AnalyzeOptions, PerturbedIntersection, Topology};
use trapnet::bem::{assemble_and_solve, icosphere, reference_family, tune_alpha_h};
use trapnet::dynamics::{integrate, secular_compare, DriveParams, IonState};
use trapnet::intersection::{
    build_constraints, solve_nullspace, straight_x_paths, theta_o, theta_x,
    verify_cotangential_quadrupole, IntersectionProblem, PathCurve,
};
use trapnet::{MultipoleField, Point3};

const THETAS: [f64; 5] = [PI / 12.0, PI / 8.0, PI / 6.0, PI / 5.0, FRAC_PI_4];

/// Stack a field's raw blocks in the unknown layout of a constraint system.
fn stack_orders(field: &MultipoleField, min_order: usize, max_order: usize) -> DVector<f64> {
    let mut parts = Vec::new();
    for order in min_order..=max_order {
        parts.extend(field.flatten_order(order).iter().copied());
    }
    DVector::from_vec(parts)
}

#[test]
fn criterion_1_two_path_crossing_pins_a_unique_third_order_field() {
    for theta in THETAS {
        let (p1, p2) = straight_x_paths(theta).unwrap();
        let problem = IntersectionProblem::new(vec![p1, p2], 3, 2).unwrap();
        let system = build_constraints(&problem).unwrap();
        let ns = solve_nullspace(&system);
        assert_eq!(ns.dimension, 1, "θ = {theta}: solution space must be a line");

        let reference = stack_orders(&theta_x(theta, 1.0).unwrap(), system.min_order, 3);
        let unit = &reference / reference.norm();
        let overlap: f64 = ns
            .basis_raw
            .iter()
            .map(|b| b.dot(&unit).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(
            overlap >= 1.0 - 1e-9,
            "θ = {theta}: closed form lies outside the solution space ({overlap})"
        );
    }
}

#[test]
fn criterion_2_no_quadrupole_can_carry_a_crossing() {
    // Transversal crossings: dipole+quadrupole ansatz admits only zero.
    for theta in THETAS {
        let (p1, p2) = straight_x_paths(theta).unwrap();
        let problem = IntersectionProblem::new(vec![p1, p2], 2, 1).unwrap();
        let ns = solve_nullspace(&build_constraints(&problem).unwrap());
        assert_eq!(ns.dimension, 0, "θ = {theta}: a quadrupole crossing appeared");
    }

    // Cotangential pairs: the shared tangent plus the first difference
    // direction force the quadrupole block to zero, whatever the curves.
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ac2);
    for pair in 0..20 {
        let m = 2 + (pair % 2); // alternate first-difference orders 2 and 3
        let (p1, p2) = random_cotangential_pair(&mut rng, m);
        let report = verify_cotangential_quadrupole(&p1, &p2).unwrap();
        assert!(report.forced_q_zero, "pair {pair} left quadrupole freedom");
        assert_eq!(report.first_difference_order, m, "pair {pair}");
        assert!(report.tangent_orthogonality_residual < 1e-9, "pair {pair}");
        assert_eq!(report.quadrupole_nullspace_dim, 0, "pair {pair}");
    }
}

/// Two arc-length paths sharing every series coefficient below order `m`.
fn random_cotangential_pair(rng: &mut ChaCha8Rng, m: usize) -> (PathCurve, PathCurve) {
    loop {
        let tangent = random_unit(rng);
        let (e1, e2) = orthonormal_frame(&tangent);
        let mut draw = |lo: f64| -> Vector3<f64> {
            let a = rng.gen_range(-0.5..0.5f64);
            let b = rng.gen_range(-0.5..0.5f64);
            e1 * (a + a.signum() * lo) + e2 * b
        };
        let (t1, t2) = match m {
            2 => {
                let w1 = draw(0.0);
                let w2 = draw(0.0);
                (vec![w1], vec![w2])
            }
            _ => {
                let shared = draw(0.0);
                (vec![shared, draw(0.0)], vec![shared, draw(0.0)])
            }
        };
        let diff = (t1[m - 2] - t2[m - 2]).norm();
        if diff < 0.05 {
            continue; // too close to the same curve; the order-m test needs a real gap
        }
        let p1 = PathCurve::from_transverse(tangent, &t1).unwrap();
        let p2 = PathCurve::from_transverse(tangent, &t2).unwrap();
        return (p1, p2);
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0f64),
        );
        let n = v.norm();
        if (0.2..=1.0).contains(&n) {
            return v / n;
        }
    }
}

fn orthonormal_frame(t: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if t.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = t.cross(&helper).normalize();
    let e2 = t.cross(&e1);
    (e1, e2)
}

#[test]
fn criterion_3_transverse_pseudopotential_follows_the_axis_profiles() {
    for theta in THETAS {
        let field = theta_x(theta, 1.0).unwrap();
        let c2 = theta.cos().powi(2);
        let c2t = (2.0 * theta).cos();
        for k in 1..=24 {
            let t = 0.05 * k as f64; // out to |t| = 1.2
            for s in [t, -t] {
                let on_y = field.field(&Point3::new(0.0, s, 0.0)).norm_squared();
                let expect_y = 9.0 * s.powi(4) * c2 * c2;
                assert!(
                    (on_y - expect_y).abs() <= 1e-10 * expect_y,
                    "θ = {theta}, y = {s}: {on_y} vs {expect_y}"
                );

                let on_z = field.field(&Point3::new(0.0, 0.0, s)).norm_squared();
                let expect_z = 9.0 * s.powi(4) * c2t * c2t;
                if (theta - FRAC_PI_4).abs() < 1e-15 {
                    // right angle: the axis out of the crossing plane is flat
                    assert!(on_z < 1e-12, "θ = π/4, z = {s}: {on_z}");
                } else {
                    assert!(
                        (on_z - expect_z).abs() <= 1e-10 * expect_z,
                        "θ = {theta}, z = {s}: {on_z} vs {expect_z}"
                    );
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 4: bias-field topology against a brute-force landscape oracle.
// ---------------------------------------------------------------------------

/// Closed-form bias landscape evaluated from scratch (not via the library):
/// V = α_X [sin²θ·z(3x² − z²) − cos²θ·z(3y² − z²)] + α_H·z, U = |∇V|².
struct BiasOracle {
    alpha_h: f64,
    alpha_x: f64,
    sin2: f64,
    cos2: f64,
}

impl BiasOracle {
    fn new(alpha_h: f64, alpha_x: f64, theta: f64) -> Self {
        Self {
            alpha_h,
            alpha_x,
            sin2: theta.sin().powi(2),
            cos2: theta.cos().powi(2),
        }
    }

    fn grad(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        let gx = self.alpha_x * self.sin2 * 6.0 * x * z;
        let gy = -self.alpha_x * self.cos2 * 6.0 * y * z;
        let gz = self.alpha_x
            * (self.sin2 * (3.0 * x * x - 3.0 * z * z) - self.cos2 * (3.0 * y * y - 3.0 * z * z))
            + self.alpha_h;
        [gx, gy, gz]
    }

    fn u(&self, x: f64, y: f64, z: f64) -> f64 {
        let [gx, gy, gz] = self.grad(x, y, z);
        gx * gx + gy * gy + gz * gz
    }

    fn u_at(&self, p: &Point3) -> f64 {
        self.u(p.x, p.y, p.z)
    }
}

const GRID_N: usize = 201;
const GRID_HALF: f64 = 0.5;

fn grid_pos(i: usize) -> f64 {
    -GRID_HALF + i as f64 * (2.0 * GRID_HALF / (GRID_N - 1) as f64)
}

fn grid_index(i: usize, j: usize, k: usize) -> usize {
    (i * GRID_N + j) * GRID_N + k
}

fn nearest_node(c: f64) -> usize {
    let h = 2.0 * GRID_HALF / (GRID_N - 1) as f64;
    ((c + GRID_HALF) / h).round().clamp(0.0, (GRID_N - 1) as f64) as usize
}

fn fill_grid(oracle: &BiasOracle, values: &mut Vec<f64>) {
    values.clear();
    values.reserve(GRID_N * GRID_N * GRID_N);
    for i in 0..GRID_N {
        let x = grid_pos(i);
        for j in 0..GRID_N {
            let y = grid_pos(j);
            for k in 0..GRID_N {
                values.push(oracle.u(x, y, grid_pos(k)));
            }
        }
    }
}

/// Argmin of the sampled landscape within a `radius`-cell ball of `center`.
fn local_grid_argmin(values: &[f64], center: &Point3, radius: isize) -> Point3 {
    let (ci, cj, ck) = (
        nearest_node(center.x) as isize,
        nearest_node(center.y) as isize,
        nearest_node(center.z) as isize,
    );
    let mut best = (f64::INFINITY, ci, cj, ck);
    let span = |c: isize| {
        (c - radius).max(0) as usize..=(c + radius).min(GRID_N as isize - 1) as usize
    };
    for i in span(ci) {
        for j in span(cj) {
            for k in span(ck) {
                let v = values[grid_index(i, j, k)];
                if v < best.0 {
                    best = (v, i as isize, j as isize, k as isize);
                }
            }
        }
    }
    Point3::new(
        grid_pos(best.1 as usize),
        grid_pos(best.2 as usize),
        grid_pos(best.3 as usize),
    )
}

/// Breadth-first sub-level connectivity: can `b` be reached from `a` while
/// staying on grid nodes with `U ≤ tau` (6-neighbour steps)?
fn sublevel_connected(
    values: &[f64],
    a: usize,
    b: usize,
    tau: f64,
    visited: &mut [u32],
    epoch: u32,
    stack: &mut Vec<usize>,
) -> bool {
    if values[a] > tau || values[b] > tau {
        return false;
    }
    stack.clear();
    stack.push(a);
    visited[a] = epoch;
    while let Some(n) = stack.pop() {
        if n == b {
            return true;
        }
        let k = n % GRID_N;
        let j = (n / GRID_N) % GRID_N;
        let i = n / (GRID_N * GRID_N);
        let mut push = |m: usize| {
            if visited[m] != epoch && values[m] <= tau {
                visited[m] = epoch;
                stack.push(m);
            }
        };
        if i > 0 {
            push(n - GRID_N * GRID_N);
        }
        if i + 1 < GRID_N {
            push(n + GRID_N * GRID_N);
        }
        if j > 0 {
            push(n - GRID_N);
        }
        if j + 1 < GRID_N {
            push(n + GRID_N);
        }
        if k > 0 {
            push(n - 1);
        }
        if k + 1 < GRID_N {
            push(n + 1);
        }
    }
    false
}

/// Golden-section maximum of `f` on `[lo, hi]` (unimodal near the peak).
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > 1e-10 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// Most-negative-curvature direction of `U` at `p` (finite differences).
fn descent_axis(oracle: &BiasOracle, p: &Point3) -> Vector3<f64> {
    let h = 2e-3;
    let mut hess = Matrix3::zeros();
    let u0 = oracle.u_at(p);
    let shift = |a: usize, s: f64, b: usize, t: f64| {
        let mut q = *p;
        q[a] += s * h;
        q[b] += t * h;
        oracle.u_at(&q)
    };
    for a in 0..3 {
        let mut qp = *p;
        let mut qm = *p;
        qp[a] += h;
        qm[a] -= h;
        hess[(a, a)] = (oracle.u_at(&qp) + oracle.u_at(&qm) - 2.0 * u0) / (h * h);
        for b in (a + 1)..3 {
            let v = (shift(a, 1.0, b, 1.0) + shift(a, -1.0, b, -1.0)
                - shift(a, 1.0, b, -1.0)
                - shift(a, -1.0, b, 1.0))
                / (4.0 * h * h);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    let eigen = nalgebra::SymmetricEigen::new(hess);
    let mut axis = 0;
    for n in 1..3 {
        if eigen.eigenvalues[n] < eigen.eigenvalues[axis] {
            axis = n;
        }
    }
    assert!(
        eigen.eigenvalues[axis] < 0.0,
        "no unstable direction at the claimed pass point {p:?}"
    );
    eigen.eigenvectors.column(axis).into_owned()
}

#[test]
fn criterion_4_bias_zeros_and_barriers_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x70b0);
    let mut values: Vec<f64> = Vec::new();
    let mut visited = vec![0u32; GRID_N * GRID_N * GRID_N];
    let mut stack: Vec<usize> = Vec::new();
    let mut epoch = 0u32;
    let cell = 2.0 * GRID_HALF / (GRID_N - 1) as f64;

    for sign in [1.0, -1.0] {
        for _ in 0..10 {
            let alpha_x = rng.gen_range(0.6..1.8f64);
            let ratio = sign * rng.gen_range(0.05..0.15f64);
            let theta = rng.gen_range(0.2..0.5f64);
            let alpha_h = ratio * alpha_x;
            let tag = format!("α_H/α_X = {ratio:.4}, θ = {theta:.4}");

            let oracle = BiasOracle::new(alpha_h, alpha_x, theta);
            let design = PerturbedIntersection::new(alpha_h, alpha_x, theta).unwrap();
            let field = design.to_field();

            // The oracle and the library evaluate the same physical field.
            for _ in 0..20 {
                let p = Point3::new(
                    rng.gen_range(-0.5..0.5f64),
                    rng.gen_range(-0.5..0.5f64),
                    rng.gen_range(-0.5..0.5f64),
                );
                let [gx, gy, gz] = oracle.grad(p.x, p.y, p.z);
                let diff = (field.field(&p) + Vector3::new(gx, gy, gz)).norm();
                assert!(diff < 1e-12 * alpha_x, "{tag}: field conventions disagree");
            }

            // Closed-form zero pair and barrier for this sign of the ratio.
            let (zeros, barrier) = if sign > 0.0 {
                let y0 = (ratio / 3.0).sqrt() / theta.cos();
                (
                    [Point3::new(0.0, y0, 0.0), Point3::new(0.0, -y0, 0.0)],
                    alpha_h * alpha_h,
                )
            } else {
                let z0 = (-ratio / (3.0 * (2.0 * theta).cos())).sqrt();
                (
                    [Point3::new(0.0, 0.0, z0), Point3::new(0.0, 0.0, -z0)],
                    alpha_h * alpha_h * theta.tan().powi(2),
                )
            };

            fill_grid(&oracle, &mut values);

            // (a) each closed-form zero is where the sampled landscape
            // bottoms out, within one grid cell
            for z in &zeros {
                let found = local_grid_argmin(&values, z, 6);
                assert!(
                    (found - z).norm() <= 1.75 * cell,
                    "{tag}: zero {z:?} vs grid minimum {found:?}"
                );
            }

            // (b) the closed-form barrier equals the smallest level at which
            // the two zero regions join up, to 0.1%
            let seed_a = grid_index(
                nearest_node(zeros[0].x),
                nearest_node(zeros[0].y),
                nearest_node(zeros[0].z),
            );
            let seed_b = grid_index(
                nearest_node(zeros[1].x),
                nearest_node(zeros[1].y),
                nearest_node(zeros[1].z),
            );
            // a straight grid path between the seeds gives a sure upper bound
            let axis = usize::from(sign > 0.0); // y for split branches, z for junction pairs
            let (lo_i, hi_i) = {
                let a = if sign > 0.0 { nearest_node(zeros[1].y) } else { nearest_node(zeros[1].z) };
                let b = if sign > 0.0 { nearest_node(zeros[0].y) } else { nearest_node(zeros[0].z) };
                (a.min(b), a.max(b))
            };
            let mid = (GRID_N - 1) / 2;
            let mut hi = 0.0f64;
            for n in lo_i..=hi_i {
                let idx = match axis {
                    1 => grid_index(mid, n, mid),
                    _ => grid_index(mid, mid, n),
                };
                hi = hi.max(values[idx]);
            }
            hi += 1e-12 * alpha_x * alpha_x;
            let mut lo = 0.0f64;
            while hi - lo > 1e-4 * barrier {
                let tau = 0.5 * (lo + hi);
                epoch += 1;
                if sublevel_connected(&values, seed_a, seed_b, tau, &mut visited, epoch, &mut stack)
                {
                    hi = tau;
                } else {
                    lo = tau;
                }
            }
            assert!(
                (hi - barrier).abs() <= 1e-3 * barrier,
                "{tag}: grid barrier {hi} vs closed form {barrier}"
            );

            // (c) the pass height is confirmed by local numerical
            // maximization along the unstable direction through the saddle
            let saddles: Vec<Point3> = if sign > 0.0 {
                vec![Point3::zeros()]
            } else {
                let amp = ratio.abs() / 6.0;
                let (s2, c2) = (theta.sin().powi(2), theta.cos().powi(2));
                let xs = (amp * (2.0 * theta).cos() / (s2 * c2)).sqrt();
                let zs = (amp / c2).sqrt();
                [1.0, -1.0]
                    .iter()
                    .flat_map(|&sx| {
                        [1.0, -1.0].map(move |sz| Point3::new(sx * xs, 0.0, sz * zs))
                    })
                    .collect()
            };
            for s in &saddles {
                let dir = descent_axis(&oracle, s);
                let peak = golden_max(|t| oracle.u_at(&(s + dir * t)), -0.05, 0.05);
                assert!(
                    (peak - barrier).abs() <= 1e-6 * barrier,
                    "{tag}: pass at {s:?} peaks at {peak} vs {barrier}"
                );
            }

            // (d) the library's own landscape report agrees
            let report = design.analyze(&AnalyzeOptions::default()).unwrap();
            let expected_topology =
                if sign > 0.0 { Topology::Disjoint } else { Topology::DoubleJunction };
            assert_eq!(report.topology, expected_topology, "{tag}");
            let reported = report.barrier_height.expect("split landscapes have a barrier");
            assert!((reported - barrier).abs() <= 1e-9 * barrier, "{tag}");
            if sign < 0.0 {
                assert_eq!(report.quadrupole_zeros.len(), 2, "{tag}");
                for q in &report.quadrupole_zeros {
                    let best = zeros.iter().map(|z| (q - z).norm()).fold(f64::INFINITY, f64::min);
                    assert!(best < 1e-6, "{tag}: reported zero {q:?} off by {best}");
                }
            }
        }
    }
}

#[test]
fn criterion_5_right_angle_quartic_confines_both_guide_axes() {
    let field = theta_o();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c70);

    // zero field along both guide axes
    for k in 0..20 {
        let t = (k as f64 - 9.5) * 0.15; // ±1.425, never 0
        let scale = t.abs().powi(3).max(1e-3);
        assert!(field.field(&Point3::new(t, 0.0, 0.0)).norm() < 1e-12 * scale);
        assert!(field.field(&Point3::new(0.0, t, 0.0)).norm() < 1e-12 * scale);
    }

    // strictly nonzero field off the axes
    for _ in 0..100 {
        let p = loop {
            let p = Point3::new(
                rng.gen_range(-1.0..1.0f64),
                rng.gen_range(-1.0..1.0f64),
                rng.gen_range(-1.0..1.0f64),
            );
            let off_x = (p.y * p.y + p.z * p.z).sqrt();
            let off_y = (p.x * p.x + p.z * p.z).sqrt();
            if p.norm() > 0.3 && off_x > 0.1 && off_y > 0.1 {
                break p;
            }
        };
        assert!(
            field.field(&p).norm() > 1e-9,
            "field vanished off the guide axes at {p:?}"
        );
    }

    // the potential stays source-free
    for _ in 0..100 {
        let p = Point3::new(
            rng.gen_range(-0.25..0.25f64),
            rng.gen_range(-0.25..0.25f64),
            rng.gen_range(-0.25..0.25f64),
        );
        assert!(field.laplacian_residual(&p, 6e-5).abs() < 1e-8);
    }
}

#[test]
fn criterion_6_boundary_solver_reaches_canonical_sphere_accuracy() {
    // Exterior of a unit sphere held at 1: potential 1/r.
    let sphere = icosphere(Point3::zeros(), 1.0, 3, 1.0);
    assert_eq!(sphere.panel_count(), 1280);
    let solution = assemble_and_solve(&sphere).unwrap();
    let directions = [
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, 1.0, 0.0),
        Vector3::new(0.0, 0.0, 1.0),
        Vector3::new(1.0, 1.0, 1.0).normalize(),
        Vector3::new(-1.0, 2.0, 0.5).normalize(),
    ];
    for r in [1.5, 2.0, 3.0, 5.0] {
        for d in &directions {
            let p = Point3::from(d * r);
            let phi = solution.potential(&p).unwrap();
            assert!(
                (phi - 1.0 / r).abs() <= 0.01 / r,
                "exterior potential at r = {r}: {phi} vs {}",
                1.0 / r
            );
        }
    }

    // Between nested spheres (inner 1 V at radius 1, outer 0 V at radius 2):
    // potential 2/r − 1, field magnitude 2/r².
    let mut nested = icosphere(Point3::zeros(), 1.0, 3, 1.0);
    nested.append(&icosphere(Point3::zeros(), 2.0, 3, 0.0));
    let solution = assemble_and_solve(&nested).unwrap();
    for r in [1.2, 1.5, 1.8] {
        let exact = 2.0 / (r * r);
        for d in &directions {
            let p = Point3::from(d * r);
            let e = solution.field(&p).unwrap();
            assert!(
                (e.norm() - exact).abs() <= 0.02 * exact,
                "annulus field at r = {r}: {} vs {exact}",
                e.norm()
            );
            // field points outward, along the radius
            assert!(e.normalize().dot(d) > 0.99);
        }
    }
}

#[test]
fn criterion_7_reference_geometry_tunes_to_the_target_crossing() {
    let family = reference_family();
    let bracket = (family.lambda_lo, family.lambda_hi);
    let result = tune_alpha_h(&family, bracket, 1e-3).unwrap();
    let fit = &result.fit;

    let panels = family.mesh(result.lambda).unwrap().panel_count();
    assert!(panels <= 6000, "mesh grew past the panel budget: {panels}");
    assert!(result.monotone, "the sweep must cross zero exactly once");
    assert!(
        fit.alpha_h.abs() < 1e-3 * fit.alpha_x.abs(),
        "axial term not nulled: α_H = {}, α_X = {}",
        fit.alpha_h,
        fit.alpha_x
    );
    assert!(
        (0.08..=0.16).contains(&fit.alpha_x_y),
        "α_X^y = {} outside the design band",
        fit.alpha_x_y
    );
    assert!(
        (0.09..=0.17).contains(&fit.alpha_x),
        "α_X = {} outside the design band",
        fit.alpha_x
    );
    let theta_deg = fit.theta_fit.expect("crossing-signed hexapole pair").to_degrees();
    assert!(
        (13.0..=21.0).contains(&theta_deg),
        "crossing half-angle {theta_deg}° outside the design band"
    );
    assert!(
        fit.symmetry_leakage < 1e-3 * fit.alpha_x.abs(),
        "symmetry-forbidden coefficients leaked: {}",
        fit.symmetry_leakage
    );
}

#[test]
fn criterion_8_guide_motion_obeys_the_mathieu_relation() {
    let field = MultipoleField::from_quadrupole(Matrix3::from_diagonal(&Vector3::new(
        1.0, -1.0, 0.0,
    )));

    let period_error = |q: f64| -> f64 {
        let drive = DriveParams::new(q).unwrap();
        let expected = 2.0 * 2f64.sqrt() / q;
        let start = IonState::new(Point3::new(0.12, 0.0, 0.0), Point3::zeros()).unwrap();
        let record = integrate(&field, &drive, &start, 8.0 * expected, 0.005).unwrap();
        let report = secular_compare(&record, &field, &drive).unwrap();
        assert!(report.confined, "q = {q}: guide motion reported unconfined");
        let measured = report.measured_period.unwrap();
        (measured - expected).abs() / expected
    };

    assert!(period_error(0.1) < 0.02, "q = 0.1 broke the 2% band");

    // halving the drive period twice (q ∝ Ω⁻²) must improve the agreement
    let errors: Vec<f64> = [0.64, 0.16, 0.04].iter().map(|&q| period_error(q)).collect();
    assert!(
        errors[0] > errors[1] && errors[1] > errors[2],
        "no monotone improvement: {errors:?}"
    );
}

#[test]
fn criterion_9_randomized_invariants_hold_under_a_fixed_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a7e5);

    // Random source-free fields: potential/field consistency and roundtrips.
    for _ in 0..60 {
        let mut field = MultipoleField::zero();
        for order in 1..=4usize {
            let raw: DVector<f64> = DVector::from_fn(3usize.pow(order as u32), |_, _| {
                rng.gen_range(-1.0..1.0f64)
            });
            let proj = trapnet::harmonic::project_symmetric_traceless(order, &raw);
            field.set_order_from_flat(order, &proj);
        }
        field.validate().unwrap();

        let p = Point3::new(
            rng.gen_range(-0.5..0.5f64),
            rng.gen_range(-0.5..0.5f64),
            rng.gen_range(-0.5..0.5f64),
        );

        // E = −∇V by central differences
        let h = 1e-5;
        let e = field.field(&p);
        for axis in 0..3 {
            let mut pp = p;
            let mut pm = p;
            pp[axis] += h;
            pm[axis] -= h;
            let grad = (field.potential(&pp) - field.potential(&pm)) / (2.0 * h);
            assert!((e[axis] + grad).abs() < 1e-8, "component {axis}: {} vs {}", e[axis], -grad);
        }

        // source-free to finite-difference accuracy
        assert!(field.laplacian_residual(&p, 1e-4).abs() < 1e-6);

        // flatten/unflatten and JSON round-trips preserve the field
        let mut rebuilt = MultipoleField::zero();
        for order in 1..=4usize {
            rebuilt.set_order_from_flat(order, &field.flatten_order(order));
        }
        let json = MultipoleField::from_json(&field.to_json()).unwrap();
        for probe in 0..20 {
            let q = Point3::new(
                (probe as f64 * 0.37).sin(),
                (probe as f64 * 0.73).cos(),
                (probe as f64 * 0.11).sin(),
            ) * 0.4;
            assert!((rebuilt.field(&q) - field.field(&q)).norm() < 1e-12);
            assert!((json.field(&q) - field.field(&q)).norm() < 1e-12);
        }
    }

    // The crossing family matches its closed-form potential everywhere.
    for _ in 0..60 {
        let theta = rng.gen_range(0.05..FRAC_PI_4);
        let alpha = rng.gen_range(0.2..3.0f64);
        let field = theta_x(theta, alpha).unwrap();
        let (s2, c2) = (theta.sin().powi(2), theta.cos().powi(2));
        let p = Point3::new(
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0f64),
        );
        let closed = alpha
            * (s2 * p.z * (3.0 * p.x * p.x - p.z * p.z)
                - c2 * p.z * (3.0 * p.y * p.y - p.z * p.z));
        assert!((field.potential(&p) - closed).abs() < 1e-12 * (1.0 + closed.abs()));
    }

    // Electrode meshes survive the disk roundtrip bit-for-bit in geometry.
    let dir = tempfile::tempdir().unwrap();
    for n in 0..6 {
        let center = Point3::new(
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0f64),
        );
        let mesh = icosphere(center, rng.gen_range(0.5..2.0f64), 1, n as f64 - 2.0);
        let obj = dir.path().join(format!("m{n}.obj"));
        let tags = dir.path().join(format!("m{n}.json"));
        trapnet::bem::write_obj_mesh(&mesh, &obj, &tags).unwrap();
        let back = trapnet::bem::read_obj_mesh(&obj, &tags).unwrap();
        assert_eq!(back.panel_count(), mesh.panel_count());
        assert!((back.total_area() - mesh.total_area()).abs() < 1e-12 * mesh.total_area());
        for t in [0, mesh.panel_count() / 2, mesh.panel_count() - 1] {
            let (a, b) = (mesh.triangle_centroid(t), back.triangle_centroid(t));
            assert!((a - b).norm() < 1e-12);
        }
    }

    // Free drift integrates exactly: zero field leaves a straight line.
    let drive = DriveParams::new(0.2).unwrap();
    let start = IonState::new(Point3::new(0.3, -0.1, 0.2), Point3::new(0.05, 0.02, -0.04)).unwrap();
    let record = integrate(&MultipoleField::zero(), &drive, &start, 3.0, 0.01).unwrap();
    for (i, p) in record.positions.iter().enumerate() {
        let t = record.times[i];
        let straight = start.position + start.velocity * t;
        assert!((p - straight).norm() < 1e-12);
    }
}
