//! Small dense convex QP solver (operator splitting / ADMM with active-set
//! polishing):
//!
//! `minimize ½xᵀPx + qᵀx  subject to  l ≤ Ax ≤ u`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub p: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constraints: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl QuadraticProgram {
    pub fn new(
        p: DMatrix<f64>,
        linear: DVector<f64>,
        constraints: DMatrix<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n || linear.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "P is {}x{}, linear term has {} entries",
                n,
                p.ncols(),
                linear.len()
            )));
        }
        let m = constraints.nrows();
        if constraints.ncols() != n || lower.len() != m || upper.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "constraint matrix is {}x{}, bounds {} / {}, variables {n}",
                m,
                constraints.ncols(),
                lower.len(),
                upper.len()
            )));
        }
        if p.iter().chain(linear.iter()).chain(constraints.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("QP data must be finite".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Err(Error::Infeasible("a lower bound exceeds its upper bound".into()));
        }
        let scale = p.amax().max(f64::MIN_POSITIVE);
        if (&p - p.transpose()).amax() > 1e-9 * scale {
            return Err(Error::InvalidArgument("P is not symmetric".into()));
        }
        if n > 0 {
            let eig = SymmetricEigen::new((&p + p.transpose()) * 0.5);
            if eig.eigenvalues.min() < -1e-9 * scale {
                return Err(Error::InvalidArgument(format!(
                    "P is not positive semidefinite (eigenvalue {:e})",
                    eig.eigenvalues.min()
                )));
            }
        }
        Ok(Self {
            p,
            linear,
            constraints,
            lower,
            upper,
        })
    }

    /// `Ax ≥ b` constraints only.
    pub fn with_lower_bounds(p: DMatrix<f64>, linear: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let upper = DVector::from_element(b.len(), f64::INFINITY);
        Self::new(p, linear, a, b, upper)
    }

    pub fn num_variables(&self) -> usize {
        self.p.nrows()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.nrows()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.linear.dot(x)
    }

    /// Largest bound violation of `x`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let ax = &self.constraints * x;
        (0..ax.len())
            .map(|i| (self.lower[i] - ax[i]).max(ax[i] - self.upper[i]).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct QpOptions {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_infeasible: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
    pub adaptive_rho_interval: usize,
    pub polish: bool,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            eps_abs: 1e-9,
            eps_rel: 1e-9,
            eps_infeasible: 1e-9,
            max_iter: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            relaxation: 1.6,
            adaptive_rho_interval: 25,
            polish: true,
        }
    }
}

/// Primal/dual iterate used to warm-start a solve.
#[derive(Debug, Clone)]
pub struct QpWarmStart {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Constraint multipliers (negative on active lower bounds).
    pub y: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub polished: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
}

/// Ruiz-equilibrated copy of the problem: `x = D x̂`, rows scaled by `E`,
/// cost scaled by `c`.
struct Scaled {
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
}

fn equilibrate(qp: &QuadraticProgram) -> Scaled {
    let (n, m) = (qp.num_variables(), qp.num_constraints());
    let mut p = qp.p.clone();
    let mut q = qp.linear.clone();
    let mut a = qp.constraints.clone();
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(m, 1.0);
    let mut c = 1.0;
    let guard = |v: f64| if v < 1e-4 { 1.0 } else { v.min(1e4) };
    for _ in 0..15 {
        let dk = DVector::from_fn(n, |j, _| {
            let col = p.column(j).amax().max(if m > 0 { a.column(j).amax() } else { 0.0 });
            1.0 / guard(col).sqrt()
        });
        let ek = DVector::from_fn(m, |i, _| 1.0 / guard(a.row(i).amax()).sqrt());
        for j in 0..n {
            for i in 0..n {
                p[(i, j)] *= dk[i] * dk[j];
            }
            q[j] *= dk[j];
            for i in 0..m {
                a[(i, j)] *= ek[i] * dk[j];
            }
        }
        d.component_mul_assign(&dk);
        e.component_mul_assign(&ek);
        let mean_col = if n > 0 { (0..n).map(|j| p.column(j).amax()).sum::<f64>() / n as f64 } else { 0.0 };
        let ck = 1.0 / guard(mean_col.max(q.amax()));
        p *= ck;
        q *= ck;
        c *= ck;
    }
    let l = DVector::from_fn(m, |i, _| qp.lower[i] * e[i]);
    let u = DVector::from_fn(m, |i, _| qp.upper[i] * e[i]);
    Scaled { p, q, a, l, u, d, e, c }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves the QP. Returns the best iterate with `converged = false` when the
/// iteration cap is reached, and [`Error::Infeasible`] when the iterates
/// certify primal or dual infeasibility.
pub fn qp_solve(qp: &QuadraticProgram, opts: &QpOptions, warm: Option<&QpWarmStart>) -> Result<QpSolution> {
    let (n, m) = (qp.num_variables(), qp.num_constraints());
    let s = equilibrate(qp);
    let project = |v: &DVector<f64>| DVector::from_fn(m, |i, _| v[i].clamp(s.l[i], s.u[i]));

    let mut x = DVector::zeros(n);
    let mut y = DVector::zeros(m);
    if let Some(w) = warm {
        if w.x.len() == n && w.y.len() == m {
            x = w.x.component_div(&s.d);
            y = DVector::from_fn(m, |i, _| w.y[i] * s.c / s.e[i]);
        }
    }
    let mut z = project(&(&s.a * &x));
    let mut rho = opts.rho;
    let rho_vec = |rho: f64| {
        // equality rows get a much stiffer penalty
        DVector::from_fn(m, |i, _| if s.u[i] - s.l[i] < 1e-10 { 1e3 * rho } else { rho })
    };
    let factor = |rho: f64| -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let r = rho_vec(rho);
        let mut k = &s.p + DMatrix::identity(n, n) * opts.sigma;
        let ra = DMatrix::from_fn(m, n, |i, j| s.a[(i, j)] * r[i]);
        k += s.a.tr_mul(&ra);
        k.cholesky()
            .ok_or_else(|| Error::Singular("QP linear system is not positive definite".into()))
    };
    let mut kkt = factor(rho)?;
    let mut rv = rho_vec(rho);
    let alpha = opts.relaxation;
    let mut converged = false;
    let mut iterations = 0;
    let (mut r_prim, mut r_dual) = (f64::INFINITY, f64::INFINITY);
    for k in 1..=opts.max_iter {
        iterations = k;
        let x_prev = x.clone();
        let y_prev = y.clone();
        let rhs = &x * opts.sigma - &s.q + s.a.tr_mul(&(rv.component_mul(&z) - &y));
        let x_tilde = kkt.solve(&rhs);
        let z_tilde = &s.a * &x_tilde;
        x = &x_tilde * alpha + &x * (1.0 - alpha);
        let z_relaxed = &z_tilde * alpha + &z * (1.0 - alpha);
        let z_next = project(&(&z_relaxed + y.component_div(&rv)));
        y += rv.component_mul(&(&z_relaxed - &z_next));
        z = z_next;

        let check = k % 5 == 0 || k == opts.max_iter;
        if !check {
            continue;
        }
        let ax = &s.a * &x;
        let px = &s.p * &x;
        let aty = s.a.tr_mul(&y);
        // unscaled residuals
        let prim = DVector::from_fn(m, |i, _| (ax[i] - z[i]) / s.e[i]);
        let dual = DVector::from_fn(n, |j, _| (px[j] + s.q[j] + aty[j]) / (s.d[j] * s.c));
        r_prim = inf_norm(&prim);
        r_dual = inf_norm(&dual);
        let ax_n = inf_norm(&DVector::from_fn(m, |i, _| ax[i] / s.e[i]));
        let z_n = inf_norm(&DVector::from_fn(m, |i, _| z[i] / s.e[i]));
        let px_n = inf_norm(&DVector::from_fn(n, |j, _| px[j] / (s.d[j] * s.c)));
        let aty_n = inf_norm(&DVector::from_fn(n, |j, _| aty[j] / (s.d[j] * s.c)));
        let q_n = inf_norm(&qp.linear);
        let eps_prim = opts.eps_abs + opts.eps_rel * ax_n.max(z_n);
        let eps_dual = opts.eps_abs + opts.eps_rel * px_n.max(aty_n).max(q_n);
        if r_prim <= eps_prim && r_dual <= eps_dual {
            converged = true;
            break;
        }

        let dy = &y - &y_prev;
        let dy_n = inf_norm(&dy);
        if dy_n > 0.0 && m > 0 {
            let atdy = DVector::from_fn(n, |j, _| s.a.column(j).dot(&dy) / s.d[j]);
            let support: f64 = (0..m)
                .map(|i| {
                    let (di, ei) = (dy[i] * s.e[i], 1.0 / s.e[i]);
                    let up = if di > 0.0 { s.u[i] * ei * di } else { 0.0 };
                    let lo = if di < 0.0 { s.l[i] * ei * di } else { 0.0 };
                    up + lo
                })
                .sum();
            let dy_unscaled = inf_norm(&DVector::from_fn(m, |i, _| dy[i] * s.e[i]));
            if inf_norm(&atdy) <= opts.eps_infeasible * dy_unscaled
                && support <= -opts.eps_infeasible * dy_unscaled
            {
                return Err(Error::Infeasible("QP constraints admit no feasible point".into()));
            }
        }
        let dx = &x - &x_prev;
        let dx_n = inf_norm(&dx);
        if dx_n > 0.0 {
            let pdx = &s.p * &dx;
            let adx = &s.a * &dx;
            let tol = opts.eps_infeasible * dx_n;
            let bounded = (0..m).all(|i| {
                (s.u[i].is_infinite() || adx[i] <= tol) && (s.l[i].is_infinite() || adx[i] >= -tol)
            });
            if inf_norm(&pdx) <= tol * s.c && s.q.dot(&dx) <= -tol * s.c && bounded && r_dual > eps_dual {
                return Err(Error::Infeasible("QP objective is unbounded below".into()));
            }
        }

        if opts.adaptive_rho_interval > 0 && k % opts.adaptive_rho_interval == 0 {
            let prim_rel = r_prim / ax_n.max(z_n).max(1e-30);
            let dual_rel = r_dual / px_n.max(aty_n).max(q_n).max(1e-30);
            let proposal = (rho * (prim_rel / dual_rel.max(1e-30)).sqrt()).clamp(1e-6, 1e6);
            if proposal > 5.0 * rho || proposal < 0.2 * rho {
                rho = proposal;
                kkt = factor(rho)?;
                rv = rho_vec(rho);
            }
        }
    }

    let mut x_out = x.component_mul(&s.d);
    let mut y_out = DVector::from_fn(m, |i, _| y[i] * s.e[i] / s.c);
    let mut polished = false;
    if opts.polish && m > 0 {
        if let Some((xp, yp)) = polish(qp, &x_out, &y_out) {
            let (pp, pd) = residuals(qp, &xp, &yp);
            if pp <= r_prim.max(opts.eps_abs) && pd <= r_dual.max(opts.eps_abs) {
                x_out = xp;
                y_out = yp;
                r_prim = pp;
                r_dual = pd;
                polished = true;
                converged = true;
            }
        }
    }
    if !converged {
        log::warn!("QP stopped after {iterations} iterations (primal {r_prim:e}, dual {r_dual:e})");
    }
    let objective = qp.objective(&x_out);
    Ok(QpSolution {
        x: x_out,
        y: y_out,
        iterations,
        converged,
        polished,
        primal_residual: r_prim,
        dual_residual: r_dual,
        objective,
    })
}

fn residuals(qp: &QuadraticProgram, x: &DVector<f64>, y: &DVector<f64>) -> (f64, f64) {
    let prim = qp.max_violation(x);
    let dual = inf_norm(&(&qp.p * x + &qp.linear + qp.constraints.tr_mul(y)));
    (prim, dual)
}

/// Solves the equality-constrained problem on the active set guessed from
/// the multipliers and keeps it when it is primal and dual feasible.
fn polish(qp: &QuadraticProgram, x: &DVector<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let (n, m) = (qp.num_variables(), qp.num_constraints());
    let ax = &qp.constraints * x;
    let mut active = Vec::new();
    let mut bounds = Vec::new();
    for i in 0..m {
        if ax[i] - qp.lower[i] < -y[i] {
            active.push(i);
            bounds.push(qp.lower[i]);
        } else if qp.upper[i] - ax[i] < y[i] {
            active.push(i);
            bounds.push(qp.upper[i]);
        }
    }
    let k = active.len();
    let delta = 1e-10 * qp.p.amax().max(1.0);
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&qp.p);
    for (r, &i) in active.iter().enumerate() {
        for j in 0..n {
            let a = qp.constraints[(i, j)];
            kkt[(n + r, j)] = a;
            kkt[(j, n + r)] = a;
        }
    }
    let mut reg = kkt.clone();
    for j in 0..n {
        reg[(j, j)] += delta;
    }
    for r in 0..k {
        reg[(n + r, n + r)] -= delta;
    }
    let lu = reg.lu();
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-&qp.linear));
    for (r, b) in bounds.iter().enumerate() {
        rhs[n + r] = *b;
    }
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..3 {
        let correction = lu.solve(&(&rhs - &kkt * &sol))?;
        sol += correction;
    }
    let xp = sol.rows(0, n).into_owned();
    let mut yp = DVector::zeros(m);
    for (r, &i) in active.iter().enumerate() {
        yp[i] = sol[n + r];
    }
    // multiplier signs: nonpositive on lower-active rows, nonnegative on upper
    let tol = 1e-8 * yp.amax().max(1.0);
    for (r, &i) in active.iter().enumerate() {
        let at_lower = bounds[r] == qp.lower[i] && qp.lower[i] != qp.upper[i];
        let at_upper = bounds[r] == qp.upper[i] && qp.lower[i] != qp.upper[i];
        if (at_lower && yp[i] > tol) || (at_upper && yp[i] < -tol) {
            return None;
        }
    }
    xp.iter().all(|v| v.is_finite()).then_some((xp, yp))
}
