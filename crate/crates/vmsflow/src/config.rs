//! Run configuration files: flat `key = value` text grouped into one
//! section per concern (`[mesh]`, `[flow]`, `[time]`, `[strategy]`,
//! `[rom]`). Parsing resolves every default, so [`RunConfig::echo`] prints
//! the complete effective configuration and parses back to an equal value.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evolve::EvolveConfig;
use crate::fem::space::BcSpec;
use crate::mesh::{
    build_channel_mesh, build_rectangle_mesh, BoundaryTag, ChannelGeometry, Mesh,
};
use crate::rom::{RomConfig, RomStrategy};
use crate::strategies::{CoarseSpaceKind, Strategy, StrategyConfig};

/// Domain selector. The channel variant meshes the benchmark geometry
/// (2.2 × 0.41 channel with the radius-0.05 circle at (0.2, 0.2)); the
/// rectangle variant is a structured grid with wall boundaries all around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometrySpec {
    CylinderChannel { target_h: f64, refinement: f64 },
    Rectangle { nx: usize, ny: usize, x: (f64, f64), y: (f64, f64) },
}

/// Dirichlet data selector for the velocity trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InflowSpec {
    /// Parabolic inlet profile with unit mean on inlet-tagged edges,
    /// no-slip elsewhere.
    Parabola,
    /// Driven top lid with linear ramps of width `ramp` at both corners.
    Lid { speed: f64, ramp: f64 },
    /// Homogeneous trace everywhere.
    Still,
}

/// When to pin one pressure dof. `Auto` pins exactly when the mesh has no
/// outlet (the pressure is otherwise determined by the natural boundary).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinPolicy {
    Auto,
    Always,
    Never,
}

impl PinPolicy {
    fn as_str(self) -> &'static str {
        match self {
            PinPolicy::Auto => "auto",
            PinPolicy::Always => "always",
            PinPolicy::Never => "never",
        }
    }
}

/// Reduced-solver parameters as configured: basis ranks plus the reduced
/// stepper settings. Viscosity and step size come from the flow sections at
/// build time so the two levels cannot drift apart.
#[derive(Debug, Clone, PartialEq)]
pub struct RomSpec {
    pub strategy: RomStrategy,
    pub r_u: usize,
    pub r_s: usize,
    pub r_p: usize,
    /// Large-scale cut of the projection split; kept even when the selected
    /// strategy ignores it so the echoed configuration is complete.
    pub rbar_u: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub gamma_d: f64,
}

/// One experiment, fully resolved: geometry, boundary data, full-order
/// strategy, and reduced-solver parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: GeometrySpec,
    pub inflow: InflowSpec,
    /// Boundary data is multiplied by `min(t / ramp_time, 1)` when positive;
    /// zero keeps the data time-constant.
    pub ramp_time: f64,
    pub pin: PinPolicy,
    pub strategy: StrategyConfig,
    /// Requested snapshot count; the stride stored in `strategy` is derived
    /// from it.
    pub n_snapshots: usize,
    pub rom: RomSpec,
}

// ---------------------------------------------------------------------------
// Parsing.

/// Raw `section.key` entries with their line numbers. Entries are marked
/// off as typed getters consume them; leftovers are reported as unknown
/// keys with their position.
struct Entries {
    path: String,
    values: BTreeMap<(String, String), (String, usize)>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<(String, String)>>,
}

impl Entries {
    fn parse(text: &str, path: &str) -> Result<Entries> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if stripped.is_empty() {
                continue;
            }
            if let Some(name) = stripped.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| Error::Parse {
                    path: path.into(),
                    line,
                    msg: format!("section header `{stripped}` is missing its `]`"),
                })?;
                section = name.trim().to_string();
                if section.is_empty() {
                    return Err(Error::Parse {
                        path: path.into(),
                        line,
                        msg: "empty section name".into(),
                    });
                }
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| Error::Parse {
                path: path.into(),
                line,
                msg: format!("expected `key = value`, got `{stripped}`"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    msg: "empty key".into(),
                });
            }
            if section.is_empty() {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    msg: format!("key `{key}` appears before any [section] header"),
                });
            }
            let id = (section.clone(), key);
            if let Some((_, first)) = values.get(&id) {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    msg: format!("key `{}` already set on line {first}", id.1),
                });
            }
            values.insert(id, (value.trim().to_string(), line));
        }
        Ok(Entries { path: path.into(), values, consumed: Default::default() })
    }

    fn err(&self, line: usize, msg: String) -> Error {
        Error::Parse { path: self.path.clone(), line, msg }
    }

    fn raw(&self, section: &str, key: &str) -> Option<(&str, usize)> {
        let id = (section.to_string(), key.to_string());
        let hit = self.values.get(&id).map(|(v, l)| (v.as_str(), *l));
        if hit.is_some() {
            self.consumed.borrow_mut().insert(id);
        }
        hit
    }

    fn get<T>(&self, section: &str, key: &str, default: T) -> Result<T>
    where
        T: std::str::FromStr,
    {
        match self.raw(section, key) {
            None => Ok(default),
            Some((v, line)) => v.parse().map_err(|_| {
                self.err(line, format!("cannot parse `{v}` for key `{key}`"))
            }),
        }
    }

    fn require<T>(&self, section: &str, key: &str) -> Result<T>
    where
        T: std::str::FromStr,
    {
        match self.raw(section, key) {
            None => Err(self.err(0, format!("missing required key `{key}` in [{section}]"))),
            Some((v, line)) => v.parse().map_err(|_| {
                self.err(line, format!("cannot parse `{v}` for key `{key}`"))
            }),
        }
    }

    /// Parses with a custom interpreter, reporting failures at the key's
    /// line. The interpreter sees the raw value string.
    fn get_with<T>(
        &self,
        section: &str,
        key: &str,
        default: T,
        f: impl Fn(&str) -> Option<T>,
    ) -> Result<T> {
        match self.raw(section, key) {
            None => Ok(default),
            Some((v, line)) => f(v)
                .ok_or_else(|| self.err(line, format!("cannot parse `{v}` for key `{key}`"))),
        }
    }

    fn finish(&self) -> Result<()> {
        let consumed = self.consumed.borrow();
        for (id, (_, line)) in &self.values {
            if !consumed.contains(id) {
                return Err(self.err(*line, format!("unknown key `{}.{}`", id.0, id.1)));
            }
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse_named(&text, &path.display().to_string())
    }

    /// Parses configuration text; `path` only labels error locations.
    pub fn parse_named(text: &str, path: &str) -> Result<RunConfig> {
        let e = Entries::parse(text, path)?;

        let geometry = {
            let (kind, line) = match e.raw("mesh", "geometry") {
                Some((v, l)) => (v.to_string(), l),
                None => return Err(e.err(0, "missing required key `geometry` in [mesh]".into())),
            };
            // Consume both variants' keys so switching geometry never turns
            // the other group into unknown-key errors.
            let target_h = e.get("mesh", "target_h", 4.02e-2)?;
            let refinement = e.get("mesh", "refinement", 9.0)?;
            let nx = e.get("mesh", "nx", 32usize)?;
            let ny = e.get("mesh", "ny", 32usize)?;
            let x = (e.get("mesh", "x_min", 0.0)?, e.get("mesh", "x_max", 1.0)?);
            let y = (e.get("mesh", "y_min", 0.0)?, e.get("mesh", "y_max", 1.0)?);
            match kind.as_str() {
                "cylinder-channel" => GeometrySpec::CylinderChannel { target_h, refinement },
                "rectangle" => GeometrySpec::Rectangle { nx, ny, x, y },
                other => {
                    return Err(e.err(
                        line,
                        format!(
                            "unknown geometry `{other}` (expected `cylinder-channel` or \
                             `rectangle`)"
                        ),
                    ))
                }
            }
        };

        let inflow = {
            let lid_speed = e.get("flow", "lid_speed", 10.0)?;
            let lid_ramp = e.get("flow", "lid_ramp", 0.06)?;
            e.get_with("flow", "inflow", InflowSpec::Still, |v| match v {
                "parabola" => Some(InflowSpec::Parabola),
                "lid" => Some(InflowSpec::Lid { speed: lid_speed, ramp: lid_ramp }),
                "none" => Some(InflowSpec::Still),
                _ => None,
            })?
        };
        let nu: f64 = e.require("flow", "nu")?;
        let ramp_time = e.get("flow", "ramp_time", 0.0)?;
        let pin = e.get_with("flow", "pin_pressure", PinPolicy::Auto, |v| match v {
            "auto" => Some(PinPolicy::Auto),
            "always" => Some(PinPolicy::Always),
            "never" => Some(PinPolicy::Never),
            _ => None,
        })?;

        let dt: f64 = e.require("time", "dt")?;
        let t_final: f64 = e.require("time", "t_final")?;
        let mut evolve = EvolveConfig::new(nu, dt);
        evolve.newton_tol = e.get("time", "newton_tol", evolve.newton_tol)?;
        evolve.newton_max_iter = e.get("time", "newton_max_iter", evolve.newton_max_iter)?;

        let kind = e.get_with("strategy", "kind", Strategy::Unfiltered, Strategy::parse)?;
        evolve.c_s = e.get_with("strategy", "smagorinsky", None, |v| match v {
            "none" => Some(None),
            _ => v.parse().ok().map(Some),
        })?;
        let mut strategy = StrategyConfig::new(kind, evolve, t_final);
        strategy.delta = e.get("strategy", "delta", strategy.delta)?;
        strategy.delta1 = e.get("strategy", "delta1", strategy.delta)?;
        strategy.delta2 = e.get("strategy", "delta2", strategy.delta)?;
        strategy.chi = e.get("strategy", "chi", strategy.chi)?;
        strategy.gamma_d = e.get("strategy", "gamma_d", strategy.gamma_d)?;
        strategy.gamma_p = e.get("strategy", "gamma_p", strategy.gamma_p)?;
        strategy.coarse =
            e.get_with("strategy", "coarse", CoarseSpaceKind::NestedP1, |v| match v {
                "nested-p1" => Some(CoarseSpaceKind::NestedP1),
                "full" => Some(CoarseSpaceKind::Full),
                _ => None,
            })?;
        let n_snapshots = e.get("strategy", "snapshots", 1000usize)?;
        if n_snapshots == 0 {
            return Err(e.err(0, "snapshot count must be at least 1".into()));
        }
        strategy.snapshot_stride =
            ((strategy.n_steps() as f64 / n_snapshots as f64).round() as usize).max(1);

        let rom = {
            let r_u = e.get("rom", "r_u", 140usize)?;
            let rbar_u = e.get("rom", "rbar_u", r_u / 2)?;
            let delta = e.get("rom", "delta", strategy.delta)?;
            RomSpec {
                strategy: e.get_with("rom", "strategy", RomStrategy::Grom, |v| match v {
                    "grom" => Some(RomStrategy::Grom),
                    "ef-rom" => Some(RomStrategy::EfRom),
                    "effc-rom" => Some(RomStrategy::EffcRom),
                    "epfc-rom" => Some(RomStrategy::EpfcRom { rbar_u }),
                    _ => None,
                })?,
                r_u,
                r_s: e.get("rom", "r_s", 15usize)?,
                r_p: e.get("rom", "r_p", 15usize)?,
                rbar_u,
                newton_tol: e.get("rom", "newton_tol", 1e-10)?,
                newton_max_iter: e.get("rom", "newton_max_iter", 25usize)?,
                delta,
                delta1: e.get("rom", "delta1", delta)?,
                delta2: e.get("rom", "delta2", delta)?,
                gamma_d: e.get("rom", "gamma_d", 0.0)?,
            }
        };

        e.finish()?;
        let cfg = RunConfig {
            geometry,
            inflow,
            ramp_time,
            pin,
            strategy,
            n_snapshots,
            rom,
        };
        cfg.validate().map_err(|err| match err {
            Error::Config(msg) => e.err(0, msg),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self.geometry {
            GeometrySpec::CylinderChannel { target_h, refinement } => {
                if !(target_h > 0.0) || !(refinement > 0.0) {
                    return Err(Error::Config(
                        "mesh spacing and refinement must be positive".into(),
                    ));
                }
            }
            GeometrySpec::Rectangle { nx, ny, x, y } => {
                if nx == 0 || ny == 0 {
                    return Err(Error::Config("grid must have at least one cell per axis".into()));
                }
                if !(x.1 > x.0) || !(y.1 > y.0) {
                    return Err(Error::Config("rectangle extents must be increasing".into()));
                }
            }
        }
        if let InflowSpec::Lid { speed, ramp } = self.inflow {
            if !speed.is_finite() || !(ramp > 0.0) {
                return Err(Error::Config(
                    "lid speed must be finite and the corner ramp positive".into(),
                ));
            }
        }
        if !(self.ramp_time >= 0.0) || !self.ramp_time.is_finite() {
            return Err(Error::Config("ramp_time must be finite and nonnegative".into()));
        }
        self.strategy.validate()?;
        let r = &self.rom;
        if r.r_u == 0 {
            return Err(Error::Config("at least one reduced velocity mode is required".into()));
        }
        if r.rbar_u > r.r_u {
            return Err(Error::Config(format!(
                "large-scale cut {} exceeds the {} reduced velocity modes",
                r.rbar_u, r.r_u
            )));
        }
        if let RomStrategy::EpfcRom { rbar_u } = r.strategy {
            if rbar_u != r.rbar_u {
                return Err(Error::Config(
                    "the projection-split strategy must carry the configured cut".into(),
                ));
            }
        }
        if !(r.gamma_d >= 0.0) || !r.gamma_d.is_finite() {
            return Err(Error::Config("reduced gamma_d must be finite and nonnegative".into()));
        }
        let mut rom_cfg = self.rom_config();
        // Placeholder positives: only the reduced-stepper fields are being
        // checked here, the flow fields were validated above.
        rom_cfg.nu = 1.0;
        rom_cfg.dt = 1.0;
        rom_cfg.validate()
    }

    /// The effective configuration, every default resolved, in file syntax.
    pub fn echo(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        s.push_str("[mesh]\n");
        match self.geometry {
            GeometrySpec::CylinderChannel { target_h, refinement } => {
                writeln!(s, "geometry = cylinder-channel").unwrap();
                writeln!(s, "target_h = {target_h}").unwrap();
                writeln!(s, "refinement = {refinement}").unwrap();
            }
            GeometrySpec::Rectangle { nx, ny, x, y } => {
                writeln!(s, "geometry = rectangle").unwrap();
                writeln!(s, "nx = {nx}").unwrap();
                writeln!(s, "ny = {ny}").unwrap();
                writeln!(s, "x_min = {}", x.0).unwrap();
                writeln!(s, "x_max = {}", x.1).unwrap();
                writeln!(s, "y_min = {}", y.0).unwrap();
                writeln!(s, "y_max = {}", y.1).unwrap();
            }
        }
        s.push_str("\n[flow]\n");
        writeln!(s, "nu = {}", self.strategy.evolve.nu).unwrap();
        match self.inflow {
            InflowSpec::Parabola => writeln!(s, "inflow = parabola").unwrap(),
            InflowSpec::Lid { speed, ramp } => {
                writeln!(s, "inflow = lid").unwrap();
                writeln!(s, "lid_speed = {speed}").unwrap();
                writeln!(s, "lid_ramp = {ramp}").unwrap();
            }
            InflowSpec::Still => writeln!(s, "inflow = none").unwrap(),
        }
        writeln!(s, "ramp_time = {}", self.ramp_time).unwrap();
        writeln!(s, "pin_pressure = {}", self.pin.as_str()).unwrap();
        s.push_str("\n[time]\n");
        writeln!(s, "dt = {}", self.strategy.evolve.dt).unwrap();
        writeln!(s, "t_final = {}", self.strategy.t_final).unwrap();
        writeln!(s, "newton_tol = {}", self.strategy.evolve.newton_tol).unwrap();
        writeln!(s, "newton_max_iter = {}", self.strategy.evolve.newton_max_iter).unwrap();
        s.push_str("\n[strategy]\n");
        writeln!(s, "kind = {}", self.strategy.strategy.as_str()).unwrap();
        match self.strategy.evolve.c_s {
            Some(c) => writeln!(s, "smagorinsky = {c}").unwrap(),
            None => writeln!(s, "smagorinsky = none").unwrap(),
        }
        writeln!(s, "delta = {}", self.strategy.delta).unwrap();
        writeln!(s, "delta1 = {}", self.strategy.delta1).unwrap();
        writeln!(s, "delta2 = {}", self.strategy.delta2).unwrap();
        writeln!(s, "chi = {}", self.strategy.chi).unwrap();
        writeln!(s, "gamma_d = {}", self.strategy.gamma_d).unwrap();
        writeln!(s, "gamma_p = {}", self.strategy.gamma_p).unwrap();
        let coarse = match self.strategy.coarse {
            CoarseSpaceKind::NestedP1 => "nested-p1",
            CoarseSpaceKind::Full => "full",
        };
        writeln!(s, "coarse = {coarse}").unwrap();
        writeln!(s, "snapshots = {}", self.n_snapshots).unwrap();
        s.push_str("\n[rom]\n");
        writeln!(s, "strategy = {}", self.rom.strategy.as_str()).unwrap();
        writeln!(s, "r_u = {}", self.rom.r_u).unwrap();
        writeln!(s, "r_s = {}", self.rom.r_s).unwrap();
        writeln!(s, "r_p = {}", self.rom.r_p).unwrap();
        writeln!(s, "rbar_u = {}", self.rom.rbar_u).unwrap();
        writeln!(s, "newton_tol = {}", self.rom.newton_tol).unwrap();
        writeln!(s, "newton_max_iter = {}", self.rom.newton_max_iter).unwrap();
        writeln!(s, "delta = {}", self.rom.delta).unwrap();
        writeln!(s, "delta1 = {}", self.rom.delta1).unwrap();
        writeln!(s, "delta2 = {}", self.rom.delta2).unwrap();
        writeln!(s, "gamma_d = {}", self.rom.gamma_d).unwrap();
        s
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        match self.geometry {
            GeometrySpec::CylinderChannel { target_h, refinement } => {
                build_channel_mesh(ChannelGeometry::default(), target_h, refinement)
            }
            GeometrySpec::Rectangle { nx, ny, x, y } => build_rectangle_mesh(nx, ny, x, y),
        }
    }

    /// The configured Dirichlet data, including the optional start-up ramp.
    pub fn boundary_spec(&self) -> BcSpec {
        let base = match self.inflow {
            InflowSpec::Parabola => {
                let height = match self.geometry {
                    GeometrySpec::CylinderChannel { .. } => ChannelGeometry::default().height,
                    GeometrySpec::Rectangle { y, .. } => y.1 - y.0,
                };
                BcSpec::channel_inflow(height)
            }
            InflowSpec::Lid { speed, ramp } => {
                let side = match self.geometry {
                    GeometrySpec::CylinderChannel { .. } => ChannelGeometry::default().height,
                    GeometrySpec::Rectangle { y, .. } => y.1,
                };
                BcSpec::cavity_lid(side, ramp, speed)
            }
            InflowSpec::Still => BcSpec::zero(),
        };
        let ramp_time = self.ramp_time;
        if ramp_time > 0.0 {
            BcSpec::new(move |p, t, tag| {
                let (ux, uy) = base.eval(p, t, tag);
                let scale = (t / ramp_time).min(1.0).max(0.0);
                (scale * ux, scale * uy)
            })
        } else {
            base
        }
    }

    /// Index of the pinned pressure dof, if the policy asks for one.
    pub fn pressure_pin(&self, mesh: &Mesh) -> Option<usize> {
        let pin = match self.pin {
            PinPolicy::Always => true,
            PinPolicy::Never => false,
            PinPolicy::Auto => !mesh
                .boundary_edges()
                .iter()
                .any(|(_, tag)| *tag == BoundaryTag::Outflow),
        };
        pin.then_some(0)
    }

    /// Reduced stepper settings with flow scales copied from the full-order
    /// sections. The reduced grad-div weight is not part of the stepper: it
    /// is baked into the operators at projection time.
    pub fn rom_config(&self) -> RomConfig {
        RomConfig {
            nu: self.strategy.evolve.nu,
            dt: self.strategy.evolve.dt,
            newton_tol: self.rom.newton_tol,
            newton_max_iter: self.rom.newton_max_iter,
            delta: self.rom.delta,
            delta1: self.rom.delta1,
            delta2: self.rom.delta2,
        }
    }

    /// Every filter radius the reduced operators must factorize for the
    /// configured strategy.
    pub fn rom_filter_radii(&self) -> Vec<f64> {
        match self.rom.strategy {
            RomStrategy::Grom => vec![],
            RomStrategy::EfRom | RomStrategy::EpfcRom { .. } => vec![self.rom.delta],
            RomStrategy::EffcRom => vec![self.rom.delta1, self.rom.delta2],
        }
    }
}
