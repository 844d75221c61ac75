//! Time-loop orchestration of the full-order regularization strategies.
//!
//! Every strategy shares one skeleton: advance the momentum/continuity system
//! one implicit Euler step to get the evolved pair `(w, p)`, postprocess `w`
//! into the regularized velocity `u`, stamp the Dirichlet trace, record
//! diagnostics, and keep a snapshot every `snapshot_stride` steps. The
//! postprocess is the only place the strategies differ:
//!
//! * `Unfiltered`   — `u = w`;
//! * `Ef`           — `u = F_δ(w)`, filter trace taken from `w`;
//! * `Efr`          — `u = (1−χ) w + χ F_δ(w)`;
//! * `Effc`         — large scales `F_{δ₁}(w)` keep the boundary data, the
//!   small-scale remainder is refiltered at `δ₂` with homogeneous trace, and
//!   the two parts are summed;
//! * `Epfc`         — large scales from an L² projection onto a coarser
//!   velocity space (with a grad-div penalty `γ_P`), small scales filtered
//!   homogeneously at `δ`;
//! * `DiffCorrect`  — `u = w̃ + (F_δ(w) − F_δ(w̃))` with `w̃` the coarse
//!   projection of `w`: the filter acts only on the difference.

use crate::diagnostics::{DiagnosticsSeries, FlowProbes};
use crate::error::{Error, Result};
use crate::evolve::{EvolveConfig, FlowSystem};
use crate::fem::space::BcSpec;
use crate::fem::TaylorHoodSpace;
use crate::filters::{small_scales, CoarseSpace, FilterBc, FilterContext};

/// Postprocess selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Unfiltered,
    Ef,
    Efr,
    Effc,
    Epfc,
    DiffCorrect,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Unfiltered => "unfiltered",
            Strategy::Ef => "ef",
            Strategy::Efr => "efr",
            Strategy::Effc => "effc",
            Strategy::Epfc => "epfc",
            Strategy::DiffCorrect => "diff-correct",
        }
    }

    pub fn parse(s: &str) -> Option<Strategy> {
        match s {
            "unfiltered" => Some(Strategy::Unfiltered),
            "ef" => Some(Strategy::Ef),
            "efr" => Some(Strategy::Efr),
            "effc" => Some(Strategy::Effc),
            "epfc" => Some(Strategy::Epfc),
            "diff-correct" => Some(Strategy::DiffCorrect),
            _ => None,
        }
    }
}

/// Which velocity space carries the large scales of the projection-based
/// strategies. `NestedP1` restricts to continuous P1 on the same mesh;
/// `Full` keeps the whole space (the projection becomes the identity).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseSpaceKind {
    NestedP1,
    Full,
}

/// Complete description of one full-order run.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub evolve: EvolveConfig,
    /// Final time; must be an integer multiple of the step size.
    pub t_final: f64,
    /// Filter radius for Ef/Efr/Epfc/DiffCorrect.
    pub delta: f64,
    /// Radii of the two Effc passes.
    pub delta1: f64,
    pub delta2: f64,
    /// Efr relaxation weight in [0, 1].
    pub chi: f64,
    /// Grad-div penalty inside the differential filter.
    pub gamma_d: f64,
    /// Grad-div penalty inside the L² projection.
    pub gamma_p: f64,
    pub coarse: CoarseSpaceKind,
    /// Keep every n-th step in the snapshot set (step 0 is always kept).
    pub snapshot_stride: usize,
}

impl StrategyConfig {
    /// Defaults follow the reference cylinder experiment: δ = 1.59·10⁻³ for
    /// every radius, χ = Δt, γ_D = 100, γ_P = 0.01, and a stride that leaves
    /// about a thousand snapshots.
    pub fn new(strategy: Strategy, evolve: EvolveConfig, t_final: f64) -> StrategyConfig {
        let delta = 1.59e-3;
        let n_steps = (t_final / evolve.dt).round().max(1.0);
        StrategyConfig {
            strategy,
            chi: evolve.dt,
            evolve,
            t_final,
            delta,
            delta1: delta,
            delta2: delta,
            gamma_d: 100.0,
            gamma_p: 0.01,
            coarse: CoarseSpaceKind::NestedP1,
            snapshot_stride: ((n_steps / 1000.0).round() as usize).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.evolve.validate()?;
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::Config(format!(
                "final time must be positive, got {}",
                self.t_final
            )));
        }
        let q = self.t_final / self.evolve.dt;
        if (q - q.round()).abs() > 1e-12 * q.round().max(1.0) || q.round() < 1.0 {
            return Err(Error::Config(format!(
                "final time {} is not an integer multiple of the step {}",
                self.t_final, self.evolve.dt
            )));
        }
        for (name, v) in [
            ("delta", self.delta),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("gamma_d", self.gamma_d),
            ("gamma_p", self.gamma_p),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be ≥ 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.chi) {
            return Err(Error::Config(format!("chi must lie in [0, 1], got {}", self.chi)));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of time steps, `round(T / Δt)`.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.evolve.dt).round() as usize
    }
}

/// Everything needed to re-derive or audit a snapshot set.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config: StrategyConfig,
    pub mesh_hash: u64,
}

/// One stored state of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
}

/// Ordered snapshots of one run on one space.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    provenance: Provenance,
    n_velocity_dofs: usize,
    n_pressure_dofs: usize,
    snapshots: Vec<Snapshot>,
}

impl SnapshotSet {
    pub fn new(provenance: Provenance, n_velocity_dofs: usize, n_pressure_dofs: usize) -> SnapshotSet {
        SnapshotSet { provenance, n_velocity_dofs, n_pressure_dofs, snapshots: Vec::new() }
    }

    pub fn push(&mut self, t: f64, velocity: Vec<f64>, pressure: Vec<f64>) -> Result<()> {
        if velocity.len() != self.n_velocity_dofs || pressure.len() != self.n_pressure_dofs {
            return Err(Error::Dimension(format!(
                "snapshot dims ({}, {}) do not match the space ({}, {})",
                velocity.len(),
                pressure.len(),
                self.n_velocity_dofs,
                self.n_pressure_dofs
            )));
        }
        if let Some(last) = self.snapshots.last() {
            if !(t > last.t) {
                return Err(Error::Invalid(format!(
                    "snapshot times must increase strictly: {t} after {}",
                    last.t
                )));
            }
        }
        self.snapshots.push(Snapshot { t, velocity, pressure });
        Ok(())
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn n_velocity_dofs(&self) -> usize {
        self.n_velocity_dofs
    }

    pub fn n_pressure_dofs(&self) -> usize {
        self.n_pressure_dofs
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.snapshots.iter().map(|s| s.t)
    }
}

/// Output of one full-order run.
#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub snapshots: SnapshotSet,
    pub diagnostics: DiagnosticsSeries,
    pub final_velocity: Vec<f64>,
    pub final_pressure: Vec<f64>,
}

/// Dispatch on the configured strategy.
pub fn run(
    sp: &TaylorHoodSpace,
    bc: &BcSpec,
    pressure_pin: Option<usize>,
    cfg: &StrategyConfig,
    u0: &[f64],
) -> Result<StrategyRun> {
    run_loop(sp, bc, pressure_pin, cfg, u0)
}

macro_rules! strategy_entry {
    ($name:ident, $variant:ident) => {
        /// Runs the time loop; the config must select the matching strategy.
        pub fn $name(
            sp: &TaylorHoodSpace,
            bc: &BcSpec,
            pressure_pin: Option<usize>,
            cfg: &StrategyConfig,
            u0: &[f64],
        ) -> Result<StrategyRun> {
            if cfg.strategy != Strategy::$variant {
                return Err(Error::Config(format!(
                    "config selects strategy '{}', not '{}'",
                    cfg.strategy.as_str(),
                    Strategy::$variant.as_str()
                )));
            }
            run_loop(sp, bc, pressure_pin, cfg, u0)
        }
    };
}

strategy_entry!(run_unfiltered, Unfiltered);
strategy_entry!(run_ef, Ef);
strategy_entry!(run_efr, Efr);
strategy_entry!(run_effc, Effc);
strategy_entry!(run_epfc, Epfc);
strategy_entry!(run_diffcorrect, DiffCorrect);

fn run_loop(
    sp: &TaylorHoodSpace,
    bc: &BcSpec,
    pressure_pin: Option<usize>,
    cfg: &StrategyConfig,
    u0: &[f64],
) -> Result<StrategyRun> {
    cfg.validate()?;
    if u0.len() != sp.n_velocity_dofs() {
        return Err(Error::Dimension(format!(
            "initial velocity has {} dofs, the space {}",
            u0.len(),
            sp.n_velocity_dofs()
        )));
    }
    let system = FlowSystem::new(sp, bc.clone(), cfg.evolve.clone(), pressure_pin)?;
    let filters = match cfg.strategy {
        Strategy::Unfiltered => None,
        _ => Some(FilterContext::new(sp)),
    };
    let coarse = match cfg.strategy {
        Strategy::Epfc | Strategy::DiffCorrect => Some(match cfg.coarse {
            CoarseSpaceKind::NestedP1 => CoarseSpace::nested_p1(sp),
            CoarseSpaceKind::Full => CoarseSpace::identity(sp),
        }),
        _ => None,
    };
    let probes = FlowProbes::new(sp);
    let nu = cfg.evolve.nu;
    let dt = cfg.evolve.dt;

    let mut u = u0.to_vec();
    system.velocity_trace(0.0).apply_trace(&mut u);
    let mut p = vec![0.0; sp.n_pressure_dofs()];

    let provenance = Provenance { config: cfg.clone(), mesh_hash: sp.mesh().content_hash() };
    let mut snapshots = SnapshotSet::new(provenance, sp.n_velocity_dofs(), sp.n_pressure_dofs());
    let mut diagnostics = DiagnosticsSeries::new();
    diagnostics.push(probes.record(0.0, &u, &p, nu, None)?)?;
    snapshots.push(0.0, u.clone(), p.clone())?;

    let at_step = |index: usize, t: f64| {
        move |e: Error| Error::Step { index, time: t, source: Box::new(e) }
    };
    for n in 1..=cfg.n_steps() {
        let t = n as f64 * dt;
        let (w, p_next, _) = system.evolve_step(&u, &p, t).map_err(at_step(n, t))?;
        let mut u_next =
            postprocess(cfg, filters.as_ref(), coarse.as_ref(), &w).map_err(at_step(n, t))?;
        system.velocity_trace(t).apply_trace(&mut u_next);
        u = u_next;
        p = p_next;
        diagnostics.push(probes.record(t, &u, &p, nu, None)?)?;
        if n % cfg.snapshot_stride == 0 {
            snapshots.push(t, u.clone(), p.clone())?;
        }
    }
    Ok(StrategyRun { snapshots, diagnostics, final_velocity: u, final_pressure: p })
}

/// The strategy-specific map from the evolved velocity to the kept one.
/// The caller stamps the Dirichlet trace afterwards.
fn postprocess(
    cfg: &StrategyConfig,
    filters: Option<&FilterContext<'_>>,
    coarse: Option<&CoarseSpace>,
    w: &[f64],
) -> Result<Vec<f64>> {
    match cfg.strategy {
        Strategy::Unfiltered => Ok(w.to_vec()),
        Strategy::Ef => {
            let filters = filters.expect("filter context exists for Ef");
            filters.differential_filter(w, cfg.delta, cfg.gamma_d, FilterBc::MatchDirichlet)
        }
        Strategy::Efr => {
            let filters = filters.expect("filter context exists for Efr");
            let filtered =
                filters.differential_filter(w, cfg.delta, cfg.gamma_d, FilterBc::MatchDirichlet)?;
            Ok(w
                .iter()
                .zip(&filtered)
                .map(|(a, b)| (1.0 - cfg.chi) * a + cfg.chi * b)
                .collect())
        }
        Strategy::Effc => {
            let filters = filters.expect("filter context exists for Effc");
            let large =
                filters.differential_filter(w, cfg.delta1, cfg.gamma_d, FilterBc::MatchDirichlet)?;
            let small = small_scales(w, &large);
            let smoothed =
                filters.differential_filter(&small, cfg.delta2, cfg.gamma_d, FilterBc::Homogeneous)?;
            Ok(large.iter().zip(&smoothed).map(|(a, b)| a + b).collect())
        }
        Strategy::Epfc => {
            let filters = filters.expect("filter context exists for Epfc");
            let coarse = coarse.expect("coarse space exists for Epfc");
            let large = coarse.l2_projection_postprocess(w, cfg.gamma_p)?;
            let small = small_scales(w, &large);
            let smoothed =
                filters.differential_filter(&small, cfg.delta, cfg.gamma_d, FilterBc::Homogeneous)?;
            Ok(large.iter().zip(&smoothed).map(|(a, b)| a + b).collect())
        }
        Strategy::DiffCorrect => {
            let filters = filters.expect("filter context exists for DiffCorrect");
            let coarse = coarse.expect("coarse space exists for DiffCorrect");
            let tilde = coarse.l2_projection_postprocess(w, cfg.gamma_p)?;
            let filtered_full =
                filters.differential_filter(w, cfg.delta, cfg.gamma_d, FilterBc::MatchDirichlet)?;
            let filtered_tilde =
                filters.differential_filter(&tilde, cfg.delta, cfg.gamma_d, FilterBc::MatchDirichlet)?;
            Ok(tilde
                .iter()
                .zip(&filtered_full)
                .zip(&filtered_tilde)
                .map(|((t, f), ft)| t + (f - ft))
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::dirichlet::velocity_dirichlet_values;
    use crate::mesh::build_rectangle_mesh;

    fn cavity(n: usize) -> TaylorHoodSpace {
        let mesh = build_rectangle_mesh(n, n, (0.0, 1.0), (0.0, 1.0)).unwrap();
        TaylorHoodSpace::new(mesh)
    }

    fn lid_bc() -> BcSpec {
        BcSpec::cavity_lid(1.0, 0.05, 1.0)
    }

    fn base_config(strategy: Strategy, n_steps: usize) -> StrategyConfig {
        let dt = 0.01;
        let mut evolve = EvolveConfig::new(0.05, dt);
        evolve.newton_tol = 1e-12;
        let mut cfg = StrategyConfig::new(strategy, evolve, n_steps as f64 * dt);
        cfg.delta = 1e-2;
        cfg.delta1 = 1e-2;
        cfg.delta2 = 1e-2;
        cfg.gamma_d = 0.5;
        cfg.gamma_p = 0.01;
        cfg.snapshot_stride = 1;
        cfg
    }

    fn zeros(sp: &TaylorHoodSpace) -> Vec<f64> {
        vec![0.0; sp.n_velocity_dofs()]
    }

    #[test]
    fn configs_validate_their_invariants() {
        let good = base_config(Strategy::Ef, 3);
        good.validate().unwrap();
        assert_eq!(good.n_steps(), 3);

        // The reference run: T = 4, Δt = 4·10⁻⁴ → 10⁴ steps, stride 10.
        let long = StrategyConfig::new(Strategy::Effc, EvolveConfig::new(1e-4, 4e-4), 4.0);
        long.validate().unwrap();
        assert_eq!(long.n_steps(), 10_000);
        assert_eq!(long.snapshot_stride, 10);

        let mut bad = base_config(Strategy::Efr, 3);
        bad.chi = 1.5;
        assert!(bad.validate().is_err());

        let mut bad = base_config(Strategy::Ef, 3);
        bad.delta = -1e-3;
        assert!(bad.validate().is_err());

        let mut bad = base_config(Strategy::Ef, 3);
        bad.t_final = 0.025; // not a multiple of 0.01
        assert!(bad.validate().is_err());

        let mut bad = base_config(Strategy::Ef, 3);
        bad.snapshot_stride = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_parameters_collapse_every_strategy_onto_unfiltered() {
        let sp = cavity(3);
        let bc = lid_bc();
        let u0 = zeros(&sp);
        let make = |strategy| {
            let mut cfg = base_config(strategy, 5);
            cfg.delta = 0.0;
            cfg.delta1 = 0.0;
            cfg.delta2 = 0.0;
            cfg.gamma_d = 0.0;
            cfg.gamma_p = 0.0;
            cfg.chi = 0.4;
            cfg.coarse = CoarseSpaceKind::Full;
            cfg
        };
        let baseline = run(&sp, &bc, Some(0), &make(Strategy::Unfiltered), &u0).unwrap();

        // Independent runs share only immutable state; drive two of them on
        // their own threads to exercise that.
        let (ef, efr) = std::thread::scope(|s| {
            let ef = s.spawn(|| run(&sp, &bc, Some(0), &make(Strategy::Ef), &u0).unwrap());
            let efr = s.spawn(|| run(&sp, &bc, Some(0), &make(Strategy::Efr), &u0).unwrap());
            (ef.join().unwrap(), efr.join().unwrap())
        });
        let effc = run(&sp, &bc, Some(0), &make(Strategy::Effc), &u0).unwrap();
        let epfc = run(&sp, &bc, Some(0), &make(Strategy::Epfc), &u0).unwrap();
        let diffc = run(&sp, &bc, Some(0), &make(Strategy::DiffCorrect), &u0).unwrap();

        let scale = baseline.final_velocity.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (name, other) in [
            ("ef", &ef),
            ("efr", &efr),
            ("effc", &effc),
            ("epfc", &epfc),
            ("diff-correct", &diffc),
        ] {
            for (i, (a, b)) in
                baseline.final_velocity.iter().zip(&other.final_velocity).enumerate()
            {
                assert!(
                    (a - b).abs() <= 1e-9 * scale.max(1.0),
                    "{name} drifts from unfiltered at dof {i}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn ef_run_equals_the_hand_composed_oracle() {
        let sp = cavity(3);
        let bc = lid_bc();
        let cfg = base_config(Strategy::Ef, 3);
        let u0 = zeros(&sp);
        let got = run_ef(&sp, &bc, Some(0), &cfg, &u0).unwrap();

        // Evolve, filter with the trace of the evolved field, restamp the
        // boundary — composed by hand from the building blocks.
        let system = FlowSystem::new(&sp, bc.clone(), cfg.evolve.clone(), Some(0)).unwrap();
        let filters = FilterContext::new(&sp);
        let mut u = u0.clone();
        system.velocity_trace(0.0).apply_trace(&mut u);
        let mut p = vec![0.0; sp.n_pressure_dofs()];
        for n in 1..=3usize {
            let t = n as f64 * cfg.evolve.dt;
            let (w, p_next, _) = system.evolve_step(&u, &p, t).unwrap();
            let mut u_next = filters
                .differential_filter(&w, cfg.delta, cfg.gamma_d, FilterBc::MatchDirichlet)
                .unwrap();
            system.velocity_trace(t).apply_trace(&mut u_next);
            u = u_next;
            p = p_next;
            let snap = &got.snapshots.snapshots()[n];
            assert_eq!(snap.velocity, u, "velocity after step {n}");
            assert_eq!(snap.pressure, p, "pressure after step {n}");
        }
        assert_eq!(got.final_velocity, u);
    }

    #[test]
    fn relaxation_endpoints_reproduce_ef_and_unfiltered() {
        let sp = cavity(3);
        let bc = lid_bc();
        let u0 = zeros(&sp);

        let mut full = base_config(Strategy::Efr, 3);
        full.chi = 1.0;
        let mut ef_cfg = base_config(Strategy::Ef, 3);
        ef_cfg.chi = 1.0; // provenance aside, the trajectories must agree
        let efr_full = run_efr(&sp, &bc, Some(0), &full, &u0).unwrap();
        let ef = run_ef(&sp, &bc, Some(0), &ef_cfg, &u0).unwrap();
        assert_eq!(efr_full.final_velocity, ef.final_velocity);

        let mut off = base_config(Strategy::Efr, 3);
        off.chi = 0.0;
        let mut plain_cfg = base_config(Strategy::Unfiltered, 3);
        plain_cfg.chi = 0.0;
        let efr_off = run_efr(&sp, &bc, Some(0), &off, &u0).unwrap();
        let plain = run_unfiltered(&sp, &bc, Some(0), &plain_cfg, &u0).unwrap();
        assert_eq!(efr_off.final_velocity, plain.final_velocity);
    }

    #[test]
    fn effc_matches_first_order_deconvolution_when_radii_agree() {
        let sp = cavity(3);
        let bc = lid_bc();
        let cfg = base_config(Strategy::Effc, 1);
        let u0 = zeros(&sp);
        let got = run_effc(&sp, &bc, Some(0), &cfg, &u0).unwrap();

        // Recover the evolved field of the single step, then compare the
        // strategy output with 2F(w) − F(F(w)) away from the boundary.
        let system = FlowSystem::new(&sp, bc.clone(), cfg.evolve.clone(), Some(0)).unwrap();
        let mut u = u0.clone();
        system.velocity_trace(0.0).apply_trace(&mut u);
        let (w, _, _) = system.evolve_step(&u, &vec![0.0; sp.n_pressure_dofs()], cfg.evolve.dt).unwrap();
        let filters = FilterContext::new(&sp);
        let deconvolved = filters
            .ad_deconvolve_order1(&w, cfg.delta1, cfg.gamma_d, FilterBc::MatchDirichlet)
            .unwrap();

        let constrained = sp.dirichlet_velocity_dofs();
        let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..w.len() {
            if constrained.contains(&i) {
                continue;
            }
            assert!(
                (got.final_velocity[i] - deconvolved[i]).abs() <= 1e-9 * scale,
                "interior dof {i}: {} vs {}",
                got.final_velocity[i],
                deconvolved[i]
            );
        }
    }

    #[test]
    fn projection_strategies_match_hand_composition() {
        let sp = cavity(4);
        let bc = lid_bc();
        let u0 = zeros(&sp);

        let cfg = base_config(Strategy::Epfc, 2);
        let got = run_epfc(&sp, &bc, Some(0), &cfg, &u0).unwrap();
        let system = FlowSystem::new(&sp, bc.clone(), cfg.evolve.clone(), Some(0)).unwrap();
        let filters = FilterContext::new(&sp);
        let coarse = CoarseSpace::nested_p1(&sp);
        let mut u = u0.clone();
        system.velocity_trace(0.0).apply_trace(&mut u);
        let mut p = vec![0.0; sp.n_pressure_dofs()];
        for n in 1..=2usize {
            let t = n as f64 * cfg.evolve.dt;
            let (w, p_next, _) = system.evolve_step(&u, &p, t).unwrap();
            let large = coarse.l2_projection_postprocess(&w, cfg.gamma_p).unwrap();
            let small = small_scales(&w, &large);
            let smoothed = filters
                .differential_filter(&small, cfg.delta, cfg.gamma_d, FilterBc::Homogeneous)
                .unwrap();
            let mut u_next: Vec<f64> =
                large.iter().zip(&smoothed).map(|(a, b)| a + b).collect();
            system.velocity_trace(t).apply_trace(&mut u_next);
            u = u_next;
            p = p_next;
        }
        assert_eq!(got.final_velocity, u, "epfc");

        let cfg = base_config(Strategy::DiffCorrect, 2);
        let got = run_diffcorrect(&sp, &bc, Some(0), &cfg, &u0).unwrap();
        let mut u = u0.clone();
        system.velocity_trace(0.0).apply_trace(&mut u);
        let mut p = vec![0.0; sp.n_pressure_dofs()];
        for n in 1..=2usize {
            let t = n as f64 * cfg.evolve.dt;
            let (w, p_next, _) = system.evolve_step(&u, &p, t).unwrap();
            let tilde = coarse.l2_projection_postprocess(&w, cfg.gamma_p).unwrap();
            let fw = filters
                .differential_filter(&w, cfg.delta, cfg.gamma_d, FilterBc::MatchDirichlet)
                .unwrap();
            let ft = filters
                .differential_filter(&tilde, cfg.delta, cfg.gamma_d, FilterBc::MatchDirichlet)
                .unwrap();
            let mut u_next: Vec<f64> = tilde
                .iter()
                .zip(&fw)
                .zip(&ft)
                .map(|((t, f), g)| t + (f - g))
                .collect();
            system.velocity_trace(t).apply_trace(&mut u_next);
            u = u_next;
            p = p_next;
        }
        assert_eq!(got.final_velocity, u, "diff-correct");
    }

    #[test]
    fn dirichlet_trace_is_exact_for_every_strategy() {
        let sp = cavity(3);
        let bc = lid_bc();
        let u0 = zeros(&sp);
        for strategy in [
            Strategy::Unfiltered,
            Strategy::Ef,
            Strategy::Efr,
            Strategy::Effc,
            Strategy::Epfc,
            Strategy::DiffCorrect,
        ] {
            let cfg = base_config(strategy, 2);
            let out = run(&sp, &bc, Some(0), &cfg, &u0).unwrap();
            // The lid is still ramping at t = 0.02, so the data is nontrivial
            // and time-dependent.
            let values = velocity_dirichlet_values(&sp, &bc, 0.02);
            assert!(!values.is_empty());
            for (dof, want) in values.iter() {
                assert!(
                    out.final_velocity[dof] == want,
                    "{}: dof {dof} carries {} instead of {want}",
                    strategy.as_str(),
                    out.final_velocity[dof]
                );
            }
        }
    }

    #[test]
    fn snapshots_respect_stride_and_record_provenance() {
        let sp = cavity(3);
        let bc = lid_bc();
        let u0 = zeros(&sp);
        let mut cfg = base_config(Strategy::Ef, 6);
        cfg.snapshot_stride = 2;
        let out = run(&sp, &bc, Some(0), &cfg, &u0).unwrap();

        let times: Vec<f64> = out.snapshots.times().collect();
        assert_eq!(times.len(), 4);
        for (i, &t) in times.iter().enumerate() {
            assert!((t - 0.02 * i as f64).abs() < 1e-15);
        }
        assert_eq!(out.diagnostics.len(), 7);
        assert!(out.diagnostics.records()[3].forces.is_none(), "no obstacle in a cavity");

        let prov = out.snapshots.provenance();
        assert_eq!(prov.config, cfg);
        assert_eq!(prov.mesh_hash, sp.mesh().content_hash());

        // The dispatching entry point and the named one agree exactly.
        let named = run_ef(&sp, &bc, Some(0), &cfg, &u0).unwrap();
        assert_eq!(named.snapshots, out.snapshots);

        // A mismatched tag is rejected up front.
        assert!(run_efr(&sp, &bc, Some(0), &cfg, &u0).is_err());

        // A failing step reports its index and time.
        let mut doomed = base_config(Strategy::Ef, 2);
        doomed.evolve.newton_max_iter = 1;
        let hot = BcSpec::cavity_lid(1.0, 0.005, 50.0);
        match run(&sp, &hot, Some(0), &doomed, &u0) {
            Err(Error::Step { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected a step error, got {other:?}"),
        }
    }
}
