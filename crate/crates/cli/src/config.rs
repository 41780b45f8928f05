//! Flat `key = value` run configuration.
//!
//! Every key has a default; a config file overrides a subset. Unknown and
//! repeated keys are rejected. The resolved table, in declaration order, is
//! what the manifest records.

use std::collections::BTreeMap;
use std::path::Path;

use larmor_core::{BarrierSpec, FieldRegion, FieldSpec, PacketResolution, Scenario, Segment, SpectralAmplitude, TimeWindow};

use crate::CliError;

const KEYS: &[(&str, &str)] = &[
    ("barrier.a", "5"),
    ("barrier.b", "6"),
    ("barrier.height", "2"),
    // `offset half_width height` triples separated by `;`. Overrides `barrier.height`.
    ("barrier.segments", ""),
    ("barrier.floor", "0"),
    ("packet.k0", "1.4142135623730951"),
    ("packet.l0", "40"),
    ("packet.truncation", "8"),
    ("field.omega_l", "0.001"),
    // `barrier` or `lo hi`.
    ("field.region", "barrier"),
    ("grids.nk", "801"),
    ("grids.dx", "0.1"),
    ("grids.region_intervals", "200"),
    ("grids.dt_factor", "0.05"),
    ("grids.span", "40"),
    ("grids.t_start", "auto"),
    ("grids.t_end", "auto"),
    ("oracle.dx", "0.05"),
    ("oracle.dt", "0.05"),
    ("stationary.k_min", "0.05"),
    ("stationary.k_max", "3"),
    ("stationary.points", "600"),
    ("decompose.margin", "5"),
    ("decompose.dx", "0.01"),
    ("hartman.kappa_d", "1 2 3 4 5 6 7 8"),
    ("hartman.spin", "true"),
    ("verify.omegas", "0.001 0.002 0.004"),
    ("probe.gap", "1"),
    ("probe.width", "1"),
    ("output.trace_stride", "10"),
    ("output.dir", "out"),
];

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

/// The raw table with defaults filled in.
#[derive(Debug, Clone)]
pub struct Table {
    values: BTreeMap<&'static str, String>,
    explicit: Vec<&'static str>,
}

impl Default for Table {
    fn default() -> Self {
        Table { values: KEYS.iter().map(|&(k, v)| (k, v.to_string())).collect(), explicit: Vec::new() }
    }
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut table = Table::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            table.set(k.trim(), v.trim())?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let k = KEYS
            .iter()
            .map(|&(k, _)| k)
            .find(|&k| k == key)
            .ok_or_else(|| bad(key, "unknown key"))?;
        if self.explicit.contains(&k) {
            return Err(bad(key, "set more than once"));
        }
        self.explicit.push(k);
        self.values.insert(k, value.to_string());
        Ok(())
    }

    /// Replace a value without counting it as set by the file.
    pub fn force(&mut self, key: &'static str, value: &str) {
        self.values.insert(key, value.to_string());
    }

    fn str(&self, key: &str) -> &str {
        &self.values[key]
    }

    fn f64(&self, key: &str) -> Result<f64, CliError> {
        let v: f64 = self.str(key).parse().map_err(|_| bad(key, format!("`{}` is not a number", self.str(key))))?;
        if !v.is_finite() {
            return Err(bad(key, "must be finite"));
        }
        Ok(v)
    }

    fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.str(key).parse().map_err(|_| bad(key, format!("`{}` is not a non-negative integer", self.str(key))))
    }

    fn bool(&self, key: &str) -> Result<bool, CliError> {
        self.str(key).parse().map_err(|_| bad(key, "expected true or false"))
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.str(key)
            .split_whitespace()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(key, format!("`{s}` is not a number"))))
            .collect()
    }

    fn auto(&self, key: &str) -> Result<Option<f64>, CliError> {
        if self.str(key) == "auto" {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    /// Resolved `key = value` lines in declaration order.
    pub fn lines(&self) -> Vec<String> {
        KEYS.iter().map(|&(k, _)| format!("{k} = {}", self.values[k])).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: BarrierSpec,
    /// Set for a single rectangular barrier.
    pub height: Option<f64>,
    pub k0: f64,
    pub l0: f64,
    pub truncation: f64,
    pub field: FieldSpec,
    pub resolution: PacketResolution,
    pub t_range: (Option<f64>, Option<f64>),
    pub oracle_dx: f64,
    pub oracle_dt: f64,
    pub sweep: (f64, f64, usize),
    pub decompose_margin: f64,
    pub decompose_dx: f64,
    pub kappa_d: Vec<f64>,
    pub hartman_spin: bool,
    pub verify_omegas: Vec<f64>,
    pub probe_gap: f64,
    pub probe_width: f64,
    pub trace_stride: usize,
    pub out_dir: String,
    pub refine: usize,
    /// The table after refinement, as recorded in the manifest.
    pub table: Table,
}

fn scaled(table: &mut Table, key: &'static str, v: String) {
    table.values.insert(key, v);
}

impl RunConfig {
    /// Validate `table` and apply `refine`, which divides every step.
    pub fn resolve(mut table: Table, refine: usize) -> Result<Self, CliError> {
        if refine == 0 {
            return Err(CliError::Config("--refine must be >= 1".into()));
        }
        if refine > 1 {
            let r = refine as f64;
            let nk = table.usize("grids.nk")?;
            let ri = table.usize("grids.region_intervals")?;
            scaled(&mut table, "grids.nk", ((nk.max(1) - 1) * refine + 1).to_string());
            scaled(&mut table, "grids.region_intervals", (ri * refine).to_string());
            for key in ["grids.dx", "grids.dt_factor", "oracle.dx", "oracle.dt", "decompose.dx"] {
                let v = table.f64(key)? / r;
                scaled(&mut table, key, format!("{v:e}"));
            }
        }

        let a = table.f64("barrier.a")?;
        let b = table.f64("barrier.b")?;
        let segments = table.str("barrier.segments").trim().to_string();
        let (spec, height) = if segments.is_empty() {
            let h = table.f64("barrier.height")?;
            (BarrierSpec::rectangular(a, b, h)?, Some(h))
        } else {
            if table.explicit.contains(&"barrier.height") {
                return Err(bad("barrier.height", "conflicts with barrier.segments"));
            }
            let mut segs = Vec::new();
            for part in segments.split(';').filter(|p| !p.trim().is_empty()) {
                let v: Vec<f64> = part
                    .split_whitespace()
                    .map(|s| s.parse::<f64>().map_err(|_| bad("barrier.segments", format!("`{s}` is not a number"))))
                    .collect::<Result<_, _>>()?;
                if v.len() != 3 {
                    return Err(bad("barrier.segments", "each segment needs `offset half_width height`"));
                }
                segs.push(Segment { offset: v[0], half_width: v[1], height: v[2] });
            }
            (BarrierSpec::new(a, b, segs, table.f64("barrier.floor")?)?, None)
        };

        let k0 = table.f64("packet.k0")?;
        if !(k0 > 0.0) {
            return Err(bad("packet.k0", "must be > 0"));
        }
        let l0 = table.f64("packet.l0")?;
        if !(l0 > 0.0) {
            return Err(bad("packet.l0", "must be > 0"));
        }
        let omega = table.f64("field.omega_l")?;
        let region = match table.str("field.region").trim() {
            "barrier" => FieldRegion::Barrier,
            other => match table.list("field.region")?.as_slice() {
                [lo, hi] => FieldRegion::Interval { lo: *lo, hi: *hi },
                _ => return Err(bad("field.region", format!("`{other}` is neither `barrier` nor `lo hi`"))),
            },
        };
        let field = FieldSpec::with_region(omega, region)?;

        let resolution = PacketResolution {
            nk: table.usize("grids.nk")?,
            dx: table.f64("grids.dx")?,
            region_intervals: table.usize("grids.region_intervals")?,
            dt_factor: table.f64("grids.dt_factor")?,
            span: table.f64("grids.span")?,
        };
        resolution.validate()?;
        let t_range = (table.auto("grids.t_start")?, table.auto("grids.t_end")?);
        if let (Some(s), Some(e)) = t_range {
            if !(e > s) {
                return Err(bad("grids.t_end", "must exceed grids.t_start"));
            }
        }

        let oracle_dx = table.f64("oracle.dx")?;
        let oracle_dt = table.f64("oracle.dt")?;
        if !(oracle_dx > 0.0 && oracle_dt > 0.0) {
            return Err(bad("oracle", "dx and dt must be > 0"));
        }
        let sweep = (table.f64("stationary.k_min")?, table.f64("stationary.k_max")?, table.usize("stationary.points")?);
        if !(sweep.0 > 0.0 && sweep.1 > sweep.0 && sweep.2 >= 2) {
            return Err(bad("stationary", "need 0 < k_min < k_max and points >= 2"));
        }
        let decompose_margin = table.f64("decompose.margin")?;
        let decompose_dx = table.f64("decompose.dx")?;
        if !(decompose_margin >= 0.0 && decompose_dx > 0.0) {
            return Err(bad("decompose", "margin must be >= 0 and dx > 0"));
        }
        let kappa_d = table.list("hartman.kappa_d")?;
        if kappa_d.is_empty() || kappa_d.iter().any(|&v| !(v > 0.0)) {
            return Err(bad("hartman.kappa_d", "need at least one positive value"));
        }
        let verify_omegas = table.list("verify.omegas")?;
        if verify_omegas.is_empty() || verify_omegas.iter().any(|&v| !(v > 0.0)) {
            return Err(bad("verify.omegas", "need at least one positive value"));
        }
        let probe_gap = table.f64("probe.gap")?;
        let probe_width = table.f64("probe.width")?;
        if !(probe_gap >= 0.0 && probe_width > 0.0) {
            return Err(bad("probe", "gap must be >= 0 and width > 0"));
        }
        let trace_stride = table.usize("output.trace_stride")?;
        if trace_stride == 0 {
            return Err(bad("output.trace_stride", "must be >= 1"));
        }

        Ok(RunConfig {
            spec,
            height,
            k0,
            l0,
            truncation: table.f64("packet.truncation")?,
            field,
            resolution,
            t_range,
            oracle_dx,
            oracle_dt,
            sweep,
            decompose_margin,
            decompose_dx,
            kappa_d,
            hartman_spin: table.bool("hartman.spin")?,
            verify_omegas,
            probe_gap,
            probe_width,
            trace_stride,
            out_dir: table.str("output.dir").to_string(),
            refine,
            table,
        })
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            spec: self.spec.clone(),
            k0: self.k0,
            l0: self.l0,
            truncation: self.truncation,
            field: self.field,
            resolution: self.resolution,
        }
    }

    pub fn amplitude(&self) -> Result<SpectralAmplitude, CliError> {
        Ok(self.scenario().amplitude()?)
    }

    /// The automatic window for `spec` and `omega_l`, with any configured
    /// endpoint replacing the automatic one at the same time step.
    pub fn window(&self, spec: &BarrierSpec, amp: &SpectralAmplitude, omega_l: f64) -> Result<TimeWindow, CliError> {
        let auto = TimeWindow::covering(spec, amp, omega_l, self.resolution.dt_factor);
        let (start, end) = (self.t_range.0.unwrap_or(auto.start), self.t_range.1.unwrap_or(auto.end));
        if start == auto.start && end == auto.end {
            return Ok(auto);
        }
        let steps = ((end - start) / auto.dt()).ceil().max(1.0) as usize;
        Ok(TimeWindow::new(start, end, steps)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let c = RunConfig::resolve(Table::default(), 1).unwrap();
        assert_eq!(c.height, Some(2.0));
        assert_eq!(c.resolution, PacketResolution::default());
        assert_eq!(c.scenario().warnings().len(), 1);
    }

    #[test]
    fn strict_keys() {
        assert!(matches!(Table::parse("barrier.c = 1"), Err(CliError::Config(_))));
        assert!(matches!(Table::parse("packet.l0 = 1\npacket.l0 = 2"), Err(CliError::Config(_))));
        assert!(matches!(Table::parse("packet.l0"), Err(CliError::Config(_))));
        let t = Table::parse("# comment\n\npacket.l0 = 1 # trailing\n").unwrap();
        assert_eq!(t.str("packet.l0"), "1");
    }

    #[test]
    fn validation_names_the_constraint() {
        for text in ["barrier.a = 0", "packet.k0 = -1", "field.omega_l = -1e-3", "grids.region_intervals = 6"] {
            let err = RunConfig::resolve(Table::parse(text).unwrap(), 1).unwrap_err();
            assert!(matches!(err, CliError::Config(_)), "{text}: {err:?}");
        }
    }

    #[test]
    fn refine_divides_steps() {
        let c = RunConfig::resolve(Table::default(), 2).unwrap();
        assert_eq!(c.resolution, PacketResolution::default().refined(2));
        assert_eq!(c.oracle_dt, 0.025);
    }

    #[test]
    fn segments_conflict_with_height() {
        let t = Table::parse("barrier.height = 3\nbarrier.segments = 0 0.5 2").unwrap();
        assert!(RunConfig::resolve(t, 1).is_err());
        let t = Table::parse("barrier.segments = 0 0.25 2; 0.375 0.125 1").unwrap();
        let c = RunConfig::resolve(t, 1).unwrap();
        assert_eq!(c.height, None);
        assert_eq!(c.spec.segments().len(), 2);
    }
}
