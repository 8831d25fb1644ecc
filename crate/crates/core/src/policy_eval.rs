//! Policy evaluation with linear features as a strongly monotone VI.
//!
//! A finite MDP under a fixed policy induces a Markov chain with kernel `P`,
//! expected rewards `R` and stationary law `π`. With features `Φ` and
//! `M = diag(π)` the evaluation problem is `F(θ) = ΦᵀM(Φθ − R − βPΦθ) = 0`,
//! sampled through the TD(0) semi-gradient.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, WeightedIndex};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::markov::{fit_geometric_decay, stream_rng, MixingParams, SampleStream};
use crate::vi_core::{check_dims, ExactOperator, Point, StochasticOperator};

const STOCHASTIC_TOL: f64 = 1e-12;
/// Largest chain solved by a dense linear system; larger ones use power iteration.
pub const DIRECT_SOLVE_MAX: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// `(S, A, p, r, β)` with sparse transition lists per state-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    beta: f64,
    outcomes: Vec<Vec<Outcome>>,
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("must lie in (0, 1), got {beta}"),
        })
    }
}

impl FiniteMdp {
    /// `outcomes[s * n_actions + a]` lists the transitions of action `a` in state `s`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        beta: f64,
        outcomes: Vec<Vec<Outcome>>,
    ) -> Result<Self> {
        check_beta(beta)?;
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidParameter {
                name: "n_states",
                reason: "MDP needs at least one state and one action".into(),
            });
        }
        check_dims(n_states * n_actions, outcomes.len())?;
        for (idx, list) in outcomes.iter().enumerate() {
            let mut total = 0.0;
            for o in list {
                if o.next >= n_states {
                    return Err(Error::IndexOutOfRange {
                        what: "next state",
                        index: o.next,
                        size: n_states,
                    });
                }
                if !(o.prob >= 0.0 && o.prob.is_finite()) || !o.reward.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "trans",
                        reason: format!(
                            "state {} action {}: bad probability {} or reward {}",
                            idx / n_actions,
                            idx % n_actions,
                            o.prob,
                            o.reward
                        ),
                    });
                }
                total += o.prob;
            }
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidParameter {
                    name: "trans",
                    reason: format!(
                        "state {} action {}: probabilities sum to {total}",
                        idx / n_actions,
                        idx % n_actions
                    ),
                });
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            beta,
            outcomes,
        })
    }

    /// Build from `(i, j, a, p, r)` triples; missing pairs have probability 0.
    pub fn from_triples(
        n_states: usize,
        n_actions: usize,
        beta: f64,
        triples: &[(usize, usize, usize, f64, f64)],
    ) -> Result<Self> {
        let mut outcomes = vec![Vec::new(); n_states * n_actions];
        for &(i, j, a, p, r) in triples {
            if i >= n_states {
                return Err(Error::IndexOutOfRange { what: "state", index: i, size: n_states });
            }
            if a >= n_actions {
                return Err(Error::IndexOutOfRange { what: "action", index: a, size: n_actions });
            }
            let list: &mut Vec<Outcome> = &mut outcomes[i * n_actions + a];
            if list.iter().any(|o| o.next == j) {
                return Err(Error::InvalidParameter {
                    name: "trans",
                    reason: format!("duplicate triple for ({i}, {j}, {a})"),
                });
            }
            list.push(Outcome { next: j, prob: p, reward: r });
        }
        Self::new(n_states, n_actions, beta, outcomes)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn outcomes(&self, s: usize, a: usize) -> &[Outcome] {
        &self.outcomes[s * self.n_actions + a]
    }

    /// All `(i, j, a, p, r)` entries in state-action order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, usize, f64, f64)> + '_ {
        self.outcomes.iter().enumerate().flat_map(move |(idx, list)| {
            let (i, a) = (idx / self.n_actions, idx % self.n_actions);
            list.iter().map(move |o| (i, o.next, a, o.prob, o.reward))
        })
    }
}

/// Stationary randomized policy `ν(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    nu: Vec<f64>,
}

impl Policy {
    /// `nu` is row-major, one row of action probabilities per state.
    pub fn new(n_states: usize, n_actions: usize, nu: Vec<f64>) -> Result<Self> {
        check_dims(n_states * n_actions, nu.len())?;
        for s in 0..n_states {
            let row = &nu[s * n_actions..(s + 1) * n_actions];
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0 && p.is_finite())) || (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidParameter {
                    name: "nu",
                    reason: format!("row {s} is not a probability vector"),
                });
            }
        }
        Ok(Self { n_states, n_actions, nu })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            nu: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.nu[s * self.n_actions + a]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// One observed transition `(s_t, s_{t+1}, r_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub s_next: usize,
    pub r: f64,
}

#[derive(Debug, Clone)]
struct Row {
    /// `(next, reward, ν(s,a)p(s,next,a))` over actions with positive mass.
    outcomes: Vec<(usize, f64, f64)>,
    sampler: WeightedIndex<f64>,
}

/// Joint law of `(a, s', r)` given `s` under the policy.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    rows: Vec<Row>,
}

impl TransitionTable {
    fn build(mdp: &FiniteMdp, policy: &Policy) -> Result<Self> {
        let mut rows = Vec::with_capacity(mdp.n_states);
        for s in 0..mdp.n_states {
            let mut outcomes = Vec::new();
            for a in 0..mdp.n_actions {
                let nu = policy.prob(s, a);
                if nu == 0.0 {
                    continue;
                }
                for o in mdp.outcomes(s, a) {
                    if o.prob > 0.0 {
                        outcomes.push((o.next, o.reward, nu * o.prob));
                    }
                }
            }
            let sampler = WeightedIndex::new(outcomes.iter().map(|o| o.2))
                .map_err(|e| Error::NotErgodic(format!("state {s} has no outgoing mass: {e}")))?;
            rows.push(Row { outcomes, sampler });
        }
        Ok(Self { rows })
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    /// `(next, reward, probability)` entries for state `s`.
    pub fn outcomes(&self, s: usize) -> &[(usize, f64, f64)] {
        &self.rows[s].outcomes
    }

    pub fn sample(&self, s: usize, rng: &mut ChaCha8Rng) -> Transition {
        let row = &self.rows[s];
        let (next, r, _) = row.outcomes[row.sampler.sample(rng)];
        Transition { s, s_next: next, r }
    }
}

#[derive(Debug, Clone)]
pub struct InducedChain {
    pub p: DMatrix<f64>,
    pub r: DVector<f64>,
    pub pi: DVector<f64>,
    pub table: TransitionTable,
    pi_sampler: WeightedIndex<f64>,
}

impl InducedChain {
    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    /// Draw a state from the stationary law.
    pub fn sample_stationary(&self, rng: &mut ChaCha8Rng) -> usize {
        self.pi_sampler.sample(rng)
    }

    /// A chain stream started from `start`.
    pub fn stream(&self, start: usize, rng: ChaCha8Rng) -> ChainStream<'_> {
        ChainStream {
            table: &self.table,
            state: start,
            rng,
        }
    }

    /// Stream `index` of the run seeded by `seed`, started from a stationary draw.
    pub fn stationary_stream(&self, seed: u64, index: u64) -> ChainStream<'_> {
        let mut rng = stream_rng(seed, index);
        let start = self.sample_stationary(&mut rng);
        self.stream(start, rng)
    }

    /// Rows `P^τ(s, ·)` for every τ in `0..=max_tau`, from start state `s`.
    pub fn step_distributions(&self, s: usize, max_tau: usize) -> Vec<DVector<f64>> {
        let n = self.n_states();
        let mut row = DVector::zeros(n);
        row[s] = 1.0;
        let mut out = Vec::with_capacity(max_tau + 1);
        out.push(row.clone());
        for _ in 0..max_tau {
            row = self.propagate(&row);
            out.push(row.clone());
        }
        out
    }

    /// `q ↦ qP` using the sparse transition table.
    pub fn propagate(&self, q: &DVector<f64>) -> DVector<f64> {
        let mut next = DVector::zeros(q.len());
        for (i, &qi) in q.iter().enumerate() {
            if qi == 0.0 {
                continue;
            }
            for &(j, _, p) in self.table.outcomes(i) {
                next[j] += qi * p;
            }
        }
        next
    }
}

/// Lazily sampled transitions of an induced chain.
#[derive(Debug, Clone)]
pub struct ChainStream<'a> {
    table: &'a TransitionTable,
    state: usize,
    rng: ChaCha8Rng,
}

impl ChainStream<'_> {
    pub fn state(&self) -> usize {
        self.state
    }
}

impl SampleStream for ChainStream<'_> {
    type Sample = Transition;
    fn next_sample(&mut self) -> Transition {
        let tr = self.table.sample(self.state, &mut self.rng);
        self.state = tr.s_next;
        tr
    }
}

impl Iterator for ChainStream<'_> {
    type Item = Transition;
    fn next(&mut self) -> Option<Transition> {
        Some(self.next_sample())
    }
}

/// Compile the policy-induced chain `(P, R, π)`.
pub fn induce_chain(mdp: &FiniteMdp, policy: &Policy) -> Result<InducedChain> {
    check_dims(mdp.n_states, policy.n_states)?;
    check_dims(mdp.n_actions, policy.n_actions)?;
    let n = mdp.n_states;
    let table = TransitionTable::build(mdp, policy)?;
    let mut p = DMatrix::zeros(n, n);
    let mut r = DVector::zeros(n);
    for i in 0..n {
        for &(j, rew, prob) in table.outcomes(i) {
            p[(i, j)] += prob;
            r[i] += prob * rew;
        }
    }
    let pi = stationary_distribution(&p, &table)?;
    let pi_sampler = WeightedIndex::new(pi.iter().copied())
        .map_err(|e| Error::NotErgodic(format!("invalid stationary law: {e}")))?;
    Ok(InducedChain { p, r, pi, table, pi_sampler })
}

fn stationary_distribution(p: &DMatrix<f64>, table: &TransitionTable) -> Result<DVector<f64>> {
    let n = p.nrows();
    let pi = if n <= DIRECT_SOLVE_MAX {
        // Solve πᵀ(P − I) = 0 with the last equation replaced by Σπ = 1.
        let mut a = p.transpose() - DMatrix::identity(n, n);
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        a.lu()
            .solve(&b)
            .ok_or_else(|| Error::NotErgodic("stationary system is singular".into()))?
    } else {
        power_stationary(table, n)
    };
    let residual = (p.tr_mul(&pi) - &pi).amax();
    if !residual.is_finite() || residual > 1e-10 {
        return Err(Error::NotErgodic(format!(
            "no unique stationary law (residual {residual:e})"
        )));
    }
    if let Some((i, v)) = pi.iter().enumerate().find(|(_, v)| !(**v > 1e-14)) {
        return Err(Error::NotErgodic(format!("state {i} has stationary mass {v:e}")));
    }
    let total = pi.sum();
    Ok(pi / total)
}

fn power_stationary(table: &TransitionTable, n: usize) -> DVector<f64> {
    // Lazy kernel (P + I)/2 shares π and is aperiodic.
    let mut pi = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..1_000_000 {
        let mut next = &pi * 0.5;
        for (i, &qi) in pi.iter().enumerate() {
            for &(j, _, prob) in table.outcomes(i) {
                next[j] += 0.5 * qi * prob;
            }
        }
        let delta = (&next - &pi).lp_norm(1);
        pi = next;
        if delta < 1e-13 {
            break;
        }
    }
    pi
}

/// `V = (I − βP)⁻¹ R`.
pub fn exact_value(chain: &InducedChain, beta: f64) -> Result<DVector<f64>> {
    check_beta(beta)?;
    let n = chain.n_states();
    let a = DMatrix::identity(n, n) - &chain.p * beta;
    let v = a
        .clone()
        .lu()
        .solve(&chain.r)
        .ok_or(Error::Singular("I − βP"))?;
    let res = (&a * &v - &chain.r).norm();
    if !(res <= 1e-10 * chain.r.norm().max(f64::MIN_POSITIVE)) && res > 1e-300 {
        return Err(Error::Singular("I − βP (inaccurate solve)"));
    }
    Ok(v)
}

/// The compiled evaluation problem.
#[derive(Debug, Clone)]
pub struct PolicyEvalVi {
    pub beta: f64,
    pub chain: InducedChain,
    pub phi: DMatrix<f64>,
    /// `Σ = ΦᵀMΦ`.
    pub sigma_mat: DMatrix<f64>,
    /// `A = ΦᵀM(I − βP)Φ`, so that `F(θ) = Aθ − b`.
    pub a_mat: DMatrix<f64>,
    /// `b = ΦᵀMR`.
    pub b_vec: DVector<f64>,
    pub theta_star: Point,
    /// `λ_min(Σ)(1 − β)`.
    pub mu: f64,
    /// Largest singular value of `A`.
    pub lip: f64,
    /// Max over reachable transitions of `‖φ(s)(φ(s) − βφ(s'))ᵀ‖₂`.
    pub lip_tilde: f64,
    pub v_exact: DVector<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

/// Build `F`, `θ*`, `μ` and `L` for features `phi` (n × d, full column rank).
pub fn compile_vi(chain: &InducedChain, phi: DMatrix<f64>, beta: f64) -> Result<PolicyEvalVi> {
    check_beta(beta)?;
    let n = chain.n_states();
    check_dims(n, phi.nrows())?;
    let d = phi.ncols();
    if d == 0 || d > n {
        return Err(Error::RankDeficient(0.0));
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("features"));
    }
    let smin = phi
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(smin > 1e-8) {
        return Err(Error::RankDeficient(smin));
    }
    let mphi = DMatrix::from_fn(n, d, |i, j| chain.pi[i] * phi[(i, j)]);
    let sigma_mat = phi.tr_mul(&mphi);
    let ip = DMatrix::identity(n, n) - &chain.p * beta;
    let a_mat = mphi.tr_mul(&(&ip * &phi));
    let b_vec = mphi.tr_mul(&chain.r);
    let theta_star = a_mat
        .clone()
        .lu()
        .solve(&b_vec)
        .ok_or(Error::Singular("ΦᵀM(I − βP)Φ"))?;
    let sym = (&sigma_mat + sigma_mat.transpose()) * 0.5;
    let lmin = sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    let mu = lmin * (1.0 - beta);
    let lip = a_mat
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            (0..d)
                .filter(|&j| phi[(i, j)] != 0.0)
                .map(|j| (j, phi[(i, j)]))
                .collect()
        })
        .collect();
    let mut lip_tilde: f64 = 0.0;
    for i in 0..n {
        let fi = phi.row(i);
        let ni = fi.norm();
        for &(j, _, _) in chain.table.outcomes(i) {
            let diff = fi - phi.row(j) * beta;
            lip_tilde = lip_tilde.max(ni * diff.norm());
        }
    }
    let v_exact = exact_value(chain, beta)?;
    Ok(PolicyEvalVi {
        beta,
        chain: chain.clone(),
        phi,
        sigma_mat,
        a_mat,
        b_vec,
        theta_star,
        mu,
        lip,
        lip_tilde,
        v_exact,
        rows,
    })
}

impl PolicyEvalVi {
    pub fn dim(&self) -> usize {
        self.phi.ncols()
    }

    pub fn n_states(&self) -> usize {
        self.phi.nrows()
    }

    /// `L̄ = max{L, L̃}`.
    pub fn lip_bar(&self) -> f64 {
        self.lip.max(self.lip_tilde)
    }

    /// `⟨φ(s), θ⟩`.
    pub fn value_at(&self, theta: &Point, s: usize) -> f64 {
        self.rows[s].iter().map(|&(j, v)| v * theta[j]).sum()
    }

    /// The TD(0) semi-gradient, with index checks.
    pub fn stochastic_operator(&self, theta: &Point, tr: &Transition) -> Result<Point> {
        check_dims(self.dim(), theta.len())?;
        for s in [tr.s, tr.s_next] {
            if s >= self.n_states() {
                return Err(Error::IndexOutOfRange { what: "state", index: s, size: self.n_states() });
            }
        }
        Ok(self.eval(theta, tr))
    }

    /// `‖F(θ)‖₂`.
    pub fn bellman_residual(&self, theta: &Point) -> f64 {
        self.apply(theta).norm()
    }

    /// `‖Φθ − V‖_D / ‖V‖_D` with `D = diag(π)`.
    pub fn weighted_error(&self, theta: &Point) -> Result<f64> {
        check_dims(self.dim(), theta.len())?;
        let mut num = 0.0;
        let mut den = 0.0;
        for s in 0..self.n_states() {
            let w = self.chain.pi[s];
            let v = self.v_exact[s];
            let e = self.value_at(theta, s) - v;
            num += w * e * e;
            den += w * v * v;
        }
        if den == 0.0 {
            return Err(Error::ZeroValue);
        }
        Ok(libm::sqrt(num / den))
    }

    /// `F(θ) − E[F̃(θ, ξ_τ) | s_0 = s] = Φᵀ(M − M_τ(s))((I − βP)Φθ − R)`.
    pub fn conditional_bias_exact(&self, theta: &Point, s: usize, tau: usize) -> Result<Point> {
        check_dims(self.dim(), theta.len())?;
        if s >= self.n_states() {
            return Err(Error::IndexOutOfRange { what: "state", index: s, size: self.n_states() });
        }
        let dist = self.chain.step_distributions(s, tau).pop().expect("τ+1 rows");
        Ok(self.bias_for_distribution(theta, &dist))
    }

    /// Bias against an arbitrary distribution `q` of the current state.
    pub fn bias_for_distribution(&self, theta: &Point, q: &DVector<f64>) -> Point {
        let w = self.td_errors(theta);
        let weights = DVector::from_fn(self.n_states(), |i, _| (self.chain.pi[i] - q[i]) * w[i]);
        self.phi.tr_mul(&weights)
    }

    /// Expected TD error per state, `((I − βP)Φθ − R)`.
    fn td_errors(&self, theta: &Point) -> DVector<f64> {
        let v = &self.phi * theta;
        &v - &self.chain.p * &v * self.beta - &self.chain.r
    }

    /// Exact noise constants of the stationary transition law:
    /// `σ² = 2 E‖F̃(θ*, ξ)‖²` and `ς² = 2 λ_max(E[AᵀA] − ĀᵀĀ)` with
    /// `A(ξ) = φ(s)(φ(s) − βφ(s'))ᵀ`.
    pub fn noise_constants(&self) -> (f64, f64) {
        let d = self.dim();
        let mut var_star = 0.0;
        let mut second = DMatrix::zeros(d, d);
        let mut u = DVector::zeros(d);
        for s in 0..self.n_states() {
            let ps = self.chain.pi[s];
            let fs = self.phi.row(s).transpose();
            let ns2 = fs.norm_squared();
            let vs = self.value_at(&self.theta_star, s);
            for &(j, r, prob) in self.chain.table.outcomes(s) {
                let w = ps * prob;
                let delta = vs - r - self.beta * self.value_at(&self.theta_star, j);
                var_star += w * delta * delta * ns2;
                u.copy_from(&fs);
                u.axpy(-self.beta, &self.phi.row(j).transpose(), 1.0);
                second.ger(w * ns2, &u, &u, 1.0);
            }
        }
        let cov = second - self.a_mat.tr_mul(&self.a_mat);
        let sym = (&cov + cov.transpose()) * 0.5;
        let lmax = sym.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
        (libm::sqrt(2.0 * var_star), libm::sqrt(2.0 * lmax))
    }

    /// Rough mixing constants from the kernel: the bias operator norm is at most
    /// `‖Φ‖² ‖I − βP‖ max_s ‖P^τ(s,·) − π‖_∞`, fitted as `C ρ^τ` over `τ ≤ max_tau`.
    pub fn estimate_mixing(&self, max_tau: usize) -> Result<MixingParams> {
        let n = self.n_states();
        let phi_norm = self.phi.clone().svd(false, false).singular_values.max();
        let ip = DMatrix::identity(n, n) - &self.chain.p * self.beta;
        let ip_norm = ip.svd(false, false).singular_values.max();
        let scale = phi_norm * phi_norm * ip_norm;
        let mut worst = vec![0.0f64; max_tau + 1];
        for s in 0..n {
            for (tau, row) in self.chain.step_distributions(s, max_tau).iter().enumerate() {
                let dev = (row - &self.chain.pi).amax();
                worst[tau] = worst[tau].max(dev);
            }
        }
        let points: Vec<(usize, f64)> =
            worst.iter().enumerate().skip(1).map(|(t, &w)| (t, scale * w)).collect();
        let tail = &points[points.len() / 2..];
        let fit = fit_geometric_decay(tail)
            .or_else(|| fit_geometric_decay(&points))
            .ok_or_else(|| Error::Setup("bias decay too fast to fit".into()))?;
        let rho = fit.rho.clamp(1e-6, 1.0 - 1e-9);
        let c = points
            .iter()
            .map(|&(t, v)| v / libm::pow(rho, t as f64))
            .fold(f64::MIN_POSITIVE, f64::max);
        MixingParams::new(c, rho)
    }
}

impl ExactOperator for PolicyEvalVi {
    fn dim(&self) -> usize {
        self.phi.ncols()
    }
    fn apply_into(&self, x: &Point, out: &mut Point) {
        out.gemv(1.0, &self.a_mat, x, 0.0);
        *out -= &self.b_vec;
    }
}

impl StochasticOperator for PolicyEvalVi {
    type Sample = Transition;
    fn dim(&self) -> usize {
        self.phi.ncols()
    }
    fn eval_into(&self, theta: &Point, tr: &Transition, out: &mut Point) {
        let delta = self.value_at(theta, tr.s) - tr.r - self.beta * self.value_at(theta, tr.s_next);
        let out = out.as_mut_slice();
        out.fill(0.0);
        for &(j, v) in &self.rows[tr.s] {
            out[j] = delta * v;
        }
    }
}

/// Feature matrix `Φ = I`.
pub fn tabular_features(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}
