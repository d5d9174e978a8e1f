//! The five batch commands.

use serde::Serialize;
use serde_json::{json, Value};

use svcheck::boundary::{
    admissibility_region, black_hole_bounds, parametric_bound, photon_surface_bounds, InequalityReport, Region,
};
use svcheck::exec::{self, Execution};
use svcheck::geometry::{evaluate_batch, CurvatureStack};
use svcheck::levelsets::{h_u_relation_residual, monotone_trace, CrossSectionRule, LevelSetQuadrature};
use svcheck::robinson::{
    conformal_killing, nozawa_divergence, nozawa_tensors, p_threshold, z_field_sample, RobinsonParams, F_of,
};
use svcheck::solutions::{from_key, negative_control_keys, standard_keys, CatalogEntry, Family};
use svcheck::static_vacuum::{
    cotton_weyl_t, kato_slack, lemma_t_norm_identity, t_norm_closed_form, t_tensor, validate_entry, vacuum_residual,
    EPS_CRIT, VACUUM_TOL,
};

use crate::config::{CommandName, RunConfig, Tolerances};
use crate::error::CliError;
use crate::output::{Cell, Sink, Table, SCHEMA_VERSION};

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub entry: String,
    pub check: String,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: CommandName,
    pub tolerances: Tolerances,
    pub passed: bool,
    pub failures: Vec<Failure>,
    pub warnings: Vec<String>,
    pub results: Value,
}

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub tol: Tolerances,
    pub sink: Sink,
}

fn resolve_entries(keys: &[String]) -> Result<Vec<CatalogEntry>, CliError> {
    if keys.is_empty() {
        return Err(CliError::Config("entry_keys is empty".into()));
    }
    keys.iter()
        .map(|k| from_key(k).map_err(|e| CliError::Config(format!("entry `{k}`: {e}"))))
        .collect()
}

fn stacks(ctx: &Context, e: &CatalogEntry) -> Vec<Result<CurvatureStack, svcheck::Error>> {
    let s = &ctx.config.point_sampling;
    evaluate_batch(&e.metric, &e.sample_points(s.count, s.seed), Execution::Parallel)
}

/// `(p, c, d)` cells of the grid, with per-entry defaults.
fn grid(ctx: &Context, n: usize, default_p: &[f64], default_cd: &[(f64, f64)]) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let g = &ctx.config.params_grid;
    let ps: Vec<f64> = if g.p.is_empty() { default_p.to_vec() } else { g.p.clone() };
    if let Some(bad) = ps.iter().find(|p| !(**p > 1.0)) {
        return Err(CliError::Config(format!("p = {bad} must exceed 1")));
    }
    let cds: Vec<(f64, f64)> = match (g.c.is_empty(), g.d.is_empty()) {
        (true, true) => default_cd.to_vec(),
        (false, false) => g.c.iter().flat_map(|&c| g.d.iter().map(move |&d| (c, d))).collect(),
        _ => return Err(CliError::Config("params_grid needs both c and d, or neither".into())),
    };
    let _ = n;
    Ok(ps.iter().flat_map(|&p| cds.iter().map(move |&(c, d)| (p, c, d))).collect())
}

/// Running worst value of one named check.
struct Check {
    name: &'static str,
    tol: f64,
    /// `true`: value must stay ≤ tol; `false`: value must stay ≥ −tol.
    upper: bool,
    worst: Option<f64>,
    error: Option<String>,
    samples: usize,
}

impl Check {
    fn upper(name: &'static str, tol: f64) -> Self {
        Self { name, tol, upper: true, worst: None, error: None, samples: 0 }
    }

    fn lower(name: &'static str, tol: f64) -> Self {
        Self { name, tol, upper: false, worst: None, error: None, samples: 0 }
    }

    fn record(&mut self, v: f64) {
        self.samples += 1;
        let v = if v.is_nan() { f64::INFINITY } else { v };
        self.worst = Some(match (self.worst, self.upper) {
            (None, _) => v,
            (Some(w), true) => w.max(v),
            (Some(w), false) => w.min(v),
        });
    }

    fn record_result(&mut self, r: Result<f64, svcheck::Error>) {
        match r {
            Ok(v) => self.record(v),
            Err(e) => {
                if self.error.is_none() {
                    self.error = Some(e.to_string());
                }
            }
        }
    }

    fn passed(&self) -> bool {
        self.error.is_none()
            && self.worst.is_none_or(|w| if self.upper { w <= self.tol } else { w >= -self.tol })
    }

    fn to_json(&self) -> Value {
        json!({
            "check": self.name,
            "worst": self.worst,
            "tolerance": self.tol,
            "bound": if self.upper { "upper" } else { "lower" },
            "samples": self.samples,
            "passed": self.passed(),
            "error": self.error,
        })
    }

    fn failure(&self, entry: &str) -> Option<Failure> {
        (!self.passed()).then(|| Failure {
            entry: entry.to_string(),
            check: self.name.to_string(),
            value: self.worst,
            tolerance: Some(self.tol),
            detail: self.error.clone().unwrap_or_else(|| {
                format!("worst value {:e} {} tolerance", self.worst.unwrap_or(f64::NAN), if self.upper { "above" } else { "below minus" })
            }),
        })
    }
}

fn rel_gap(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor).max(f64::MIN_POSITIVE)
}

fn near_one(f: f64) -> bool {
    (f - 1.0).abs() < 1e-9
}

pub fn verify(ctx: &Context) -> Result<Summary, CliError> {
    let entries = resolve_entries(&ctx.config.entry_keys)?;
    let t = ctx.tol;
    let mut failures = Vec::new();
    let mut results = Vec::new();
    let mut table = Table::new(vec!["entry", "check", "worst", "tolerance", "bound", "samples", "passed"]);
    for e in &entries {
        let n = e.dim();
        let cells = grid(ctx, n, &[p_threshold(n), 2.0, 3.0], &[(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])?;
        let params: Vec<RobinsonParams> = cells
            .iter()
            .map(|&(p, c, d)| RobinsonParams::new(n, p, c, d))
            .collect::<Result<_, _>>()?;
        let mut vac = Check::upper("static_vacuum", t.vacuum);
        let mut tzero = Check::upper("t_vanishing", t.t_zero);
        let mut closed = Check::upper("t_norm_closed_form", t.t_closed_form);
        let mut bianchi = Check::upper("contracted_bianchi", t.bianchi);
        let mut bochner = Check::upper("bochner", t.bianchi);
        let mut lemma = Check::upper("t_norm_identity", t.identity);
        let mut cotton = Check::upper("cotton_weyl_t", t.identity);
        let mut kato = Check::lower("refined_kato", t.kato);
        let mut noz = Check::upper("nozawa_s_t", t.nozawa);
        let mut ck = Check::upper("conformal_killing", t.nozawa);
        let mut rob = Check::upper("robinson_identity", t.robinson);
        let mut ndiv = Check::upper("nozawa_divergence", t.robinson);
        let mut sign = Check::lower("divergence_sign", t.sign);
        for s in stacks(ctx, e) {
            let s = match s {
                Ok(s) => s,
                Err(err) => {
                    vac.record_result(Err(err));
                    continue;
                }
            };
            let f = s.f;
            vac.record(vacuum_residual(&s, f).max() / (1.0 + s.hess_f.max_abs()));
            let t2 = t_tensor(&s).norm2;
            if e.expected.t_zero {
                tzero.record(t2);
            }
            let natural = s.ricci_norm2() * s.norm2_grad_f;
            closed.record(rel_gap(t2, t_norm_closed_form(&s), natural));
            let bscale = s.div_ricci.iter().chain(&s.grad_r_scalar).fold(0.0f64, |m, v| m.max(v.abs()));
            bianchi.record(s.contracted_bianchi_residual() / (1.0 + bscale));
            bochner.record(rel_gap(
                s.lap_norm2_grad_f,
                s.lap_norm2_grad_f_bochner,
                s.norm2_hess_f + s.norm2_grad_f * s.ricci_norm2().sqrt(),
            ));
            lemma.record_result(
                lemma_t_norm_identity(&s, f, VACUUM_TOL).map(|r| rel_gap(r.lhs, r.rhs, f * f * natural)),
            );
            cotton.record_result(cotton_weyl_t(&s, f, VACUUM_TOL).map(|r| {
                let scale = r.f_cotton.max_abs().max(r.weyl_grad_f.max_abs()).max(r.t.max_abs());
                // f·∇Ric is the size of the terms cancelling inside f·C
                let floor = (f * s.nabla_ricci.max_abs()).abs().max(f.abs() * natural.sqrt());
                r.residual / scale.max(floor).max(f64::MIN_POSITIVE)
            }));
            kato.record_result(kato_slack(&s, EPS_CRIT).map(|k| k / s.norm2_hess_f.max(f64::MIN_POSITIVE)));
            if near_one(f) {
                continue;
            }
            noz.record_result(nozawa_tensors(&s, f).map(|x| x.s_t_residual(&s, f)));
            ck.record_result(conformal_killing(&s, f).map(|x| x.residual));
            for prm in &params {
                match z_field_sample(&s, f, prm, VACUUM_TOL) {
                    Ok(z) => {
                        rob.record(z.residual());
                        if prm.regime.sign_definite && z.f_coeff >= 0.0 {
                            sign.record(z.div_z);
                        }
                    }
                    Err(err) => rob.record_result(Err(err)),
                }
                ndiv.record_result(nozawa_divergence(&s, f, prm, VACUUM_TOL).map(|x| x.residual));
            }
        }
        let checks = [vac, tzero, closed, bianchi, bochner, lemma, cotton, kato, noz, ck, rob, ndiv, sign];
        let checks: Vec<&Check> = checks.iter().filter(|c| c.samples > 0 || c.error.is_some()).collect();
        for c in &checks {
            table.rows.push(vec![
                Cell::Text(e.key.clone()),
                Cell::Text(c.name.into()),
                Cell::Num(c.worst.unwrap_or(f64::NAN)),
                Cell::Num(c.tol),
                Cell::Text(if c.upper { "upper" } else { "lower" }.into()),
                Cell::Int(c.samples as u64),
                Cell::Bool(c.passed()),
            ]);
            failures.extend(c.failure(&e.key));
        }
        results.push(json!({
            "entry": e.key,
            "passed": checks.iter().all(|c| c.passed()),
            "checks": checks.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        }));
    }
    ctx.sink.table("verify", &table)?;
    Ok(summary(ctx, CommandName::Verify, failures, Vec::new(), Value::from(results)))
}

pub fn sweep(ctx: &Context) -> Result<Summary, CliError> {
    let entries = resolve_entries(&ctx.config.entry_keys)?;
    let t = ctx.tol;
    let mut table = Table::new(vec![
        "entry", "p", "c", "d", "point", "f", "F", "div_z", "lhs", "rhs", "residual", "sign_required", "passed", "error",
    ]);
    let mut failures = Vec::new();
    for e in &entries {
        let n = e.dim();
        let cells = grid(ctx, n, &[p_threshold(n), 2.0, 3.0, 4.0], &[(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, 1.0)])?;
        let params: Vec<RobinsonParams> = cells
            .iter()
            .map(|&(p, c, d)| RobinsonParams::new(n, p, c, d))
            .collect::<Result<_, _>>()?;
        let ss = stacks(ctx, e);
        let rows = exec::map(Execution::Parallel, &params, |prm| {
            let mut out = Vec::new();
            for (i, s) in ss.iter().enumerate() {
                let s = match s {
                    Ok(s) => s,
                    Err(err) => {
                        out.push((i, f64::NAN, f64::NAN, None, Some(err.to_string())));
                        continue;
                    }
                };
                if near_one(s.f) {
                    continue;
                }
                let fc = F_of(s.f, prm).unwrap_or(f64::NAN);
                match z_field_sample(s, s.f, prm, VACUUM_TOL) {
                    Ok(z) => out.push((i, s.f, fc, Some((z.div_z, z.lhs, z.rhs_total(), z.residual())), None)),
                    Err(err) => out.push((i, s.f, fc, None, Some(err.to_string()))),
                }
            }
            out
        });
        for (prm, cell_rows) in params.iter().zip(rows) {
            for (i, f, fc, z, err) in cell_rows {
                let sign_required = prm.regime.sign_definite && fc >= 0.0;
                let (div_z, lhs, rhs, residual, ok) = match z {
                    Some((div_z, lhs, rhs, res)) => {
                        let ok = res <= t.robinson && (!sign_required || div_z >= -t.sign);
                        (div_z, lhs, rhs, res, ok)
                    }
                    None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, false),
                };
                if !ok {
                    failures.push(Failure {
                        entry: e.key.clone(),
                        check: if err.is_some() || residual > t.robinson { "robinson_identity" } else { "divergence_sign" }
                            .into(),
                        value: if residual.is_nan() { None } else { Some(residual) },
                        tolerance: Some(t.robinson),
                        detail: err.clone().unwrap_or_else(|| {
                            format!("p = {}, c = {}, d = {}, point {i}: div Z = {div_z:e}", prm.p, prm.c, prm.d)
                        }),
                    });
                }
                table.rows.push(vec![
                    Cell::Text(e.key.clone()),
                    Cell::Num(prm.p),
                    Cell::Num(prm.c),
                    Cell::Num(prm.d),
                    Cell::Int(i as u64),
                    Cell::Num(f),
                    Cell::Num(fc),
                    Cell::Num(div_z),
                    Cell::Num(lhs),
                    Cell::Num(rhs),
                    Cell::Num(residual),
                    Cell::Bool(sign_required),
                    Cell::Bool(ok),
                    Cell::Text(err.unwrap_or_default()),
                ]);
            }
        }
    }
    let rows = table.rows.len();
    ctx.sink.table("sweep", &table)?;
    let failed = failures.len();
    Ok(summary(
        ctx,
        CommandName::Sweep,
        failures,
        Vec::new(),
        json!({ "rows": rows, "failed_rows": failed }),
    ))
}

fn default_f0(q: &LevelSetQuadrature) -> f64 {
    if q.level(0.0).is_ok() {
        0.0
    } else {
        q.profile.lapse(q.profile.r_lo)
    }
}

fn default_f_end(q: &LevelSetQuadrature, f0: f64) -> f64 {
    let outer = q.profile.lapse(q.profile.r_hi * (1.0 - 1e-9));
    if f0 < 1.0 {
        outer.min(0.999)
    } else {
        outer.max(1.001)
    }
}

pub fn trace(ctx: &Context) -> Result<Summary, CliError> {
    let entries = resolve_entries(&ctx.config.entry_keys)?;
    let t = ctx.tol;
    let trace_cfg = &ctx.config.trace;
    let count = trace_cfg.levels.unwrap_or(32);
    if count < 2 {
        return Err(CliError::Config("trace.levels must be at least 2".into()));
    }
    let mut failures = Vec::new();
    let mut results = Vec::new();
    let mut index = 0usize;
    for e in &entries {
        let q = LevelSetQuadrature::new(e, CrossSectionRule::Exact)
            .map_err(|err| CliError::Config(format!("entry `{}`: {err}", e.key)))?;
        let n = q.n();
        let f0 = trace_cfg.f0.unwrap_or_else(|| default_f0(&q));
        if (f0 - 1.0).abs() < 1e-14 {
            return Err(svcheck::Error::ZeroMass.into());
        }
        let f_end = trace_cfg.f_end.unwrap_or_else(|| default_f_end(&q, f0));
        let levels: Vec<f64> = (0..count).map(|k| f0 + (f_end - f0) * k as f64 / (count - 1) as f64).collect();
        let cells = grid(ctx, n, &[1.5, 2.0, 3.0], &[(0.0, 1.0)])?;
        for &(p, c, d) in &cells {
            let region = admissibility_region(f0, c, d)?;
            if region == Region::Outside {
                return Err(CliError::Config(format!(
                    "(c, d) = ({c}, {d}) is {region} for f0 = {f0}: not admissible"
                )));
            }
            let params = RobinsonParams::new(n, p, c, d)?;
            let tr = monotone_trace(&q, &params, f0, &levels)
                .map_err(|err| CliError::Config(format!("entry `{}`: {err}", e.key)))?;
            let scale = tr.limit.abs().max(tr.h_values.iter().fold(0.0f64, |m, v| m.max(v.abs()))).max(1e-300);
            let monotone = tr.is_monotone(t.monotone);
            let schwarzschild = matches!(e.family, Family::Schwarzschild { .. });
            let deviation = tr.max_deviation_from_limit() / scale;
            let constant = deviation <= t.monotone;
            let relation = h_u_relation_residual(&tr, n);
            let direction = if f0 < 1.0 { "nondecreasing_in_f" } else { "nonincreasing_in_f" };
            let mut check = |ok: bool, name: &str, value: f64, tol: f64, detail: String| {
                if !ok {
                    failures.push(Failure {
                        entry: e.key.clone(),
                        check: name.into(),
                        value: Some(value),
                        tolerance: Some(tol),
                        detail,
                    });
                }
            };
            // monotonicity rests on div Z ≥ 0, which needs p ≥ p_n
            let asserted = params.regime.sign_definite;
            if asserted {
                check(monotone, "monotone", f64::NAN, t.monotone, format!("trace {index} is not {direction} (p = {p}, c = {c}, d = {d})"));
            }
            if schwarzschild {
                check(constant, "constant_at_limit", deviation, t.monotone, format!("trace {index} deviates from −F = {}", tr.limit));
            }
            check(relation <= t.relation, "h_u_relation", relation, t.relation, format!("trace {index}"));
            let stem = format!("trace_{index:03}");
            let mut table = Table::new(vec!["f", "r", "area", "kappa_or_normgrad", "H_pcd", "U_p", "U_p_prime"]);
            table.comments.push(format!(
                "schema_version={SCHEMA_VERSION} entry={} n={n} m={:?} p={p:?} c={c:?} d={d:?} f0={f0:?}",
                e.key, tr.mass
            ));
            for i in 0..tr.f_values.len() {
                table.rows.push(vec![
                    Cell::Num(tr.f_values[i]),
                    Cell::Num(tr.r_values[i]),
                    Cell::Num(tr.area[i]),
                    Cell::Num(tr.kappa[i].abs()),
                    Cell::Num(tr.h_values[i]),
                    Cell::Num(tr.u_values[i]),
                    Cell::Num(tr.u_prime_values[i]),
                ]);
            }
            let file = ctx.sink.table(&stem, &table)?;
            results.push(json!({
                "trace": index,
                "file": file.and_then(|p| p.file_name().map(|s| s.to_string_lossy().into_owned())),
                "entry": e.key,
                "n": n, "m": tr.mass, "p": p, "c": c, "d": d, "f0": f0,
                "region": region.to_string(),
                "limit": tr.limit,
                "max_relative_deviation_from_limit": deviation,
                "constant": constant,
                "monotone": monotone,
                "monotone_asserted": asserted,
                "direction": direction,
                "h_u_relation_residual": relation,
                "route_gap": tr.route_gap(),
            }));
            index += 1;
        }
    }
    Ok(summary(ctx, CommandName::Trace, failures, Vec::new(), Value::from(results)))
}

fn report_row(table: &mut Table, data_index: usize, r: &InequalityReport) {
    table.rows.push(vec![
        Cell::Int(data_index as u64),
        Cell::Text(r.name.clone()),
        Cell::Num(r.lhs),
        Cell::Num(r.rhs),
        Cell::Num(r.slack),
        Cell::Bool(r.satisfied),
        Cell::Bool(r.equality_within),
        Cell::Bool(r.rigidity),
        Cell::Bool(r.hypothesis),
    ]);
}

pub fn boundary(ctx: &Context) -> Result<Summary, CliError> {
    let data = ctx.config.boundary.to_vec();
    if data.is_empty() {
        return Err(CliError::Config("boundary: no BoundaryData supplied".into()));
    }
    let tol = ctx.tol.equality;
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    let mut results = Vec::new();
    let mut table = Table::new(vec![
        "data", "name", "lhs", "rhs", "slack", "satisfied", "equality_within", "rigidity", "hypothesis",
    ]);
    for (i, b) in data.iter().enumerate() {
        b.validate()?;
        warnings.extend(b.warnings().into_iter().map(|w| format!("boundary[{i}]: {w}")));
        let mut reports = if b.f0 == 0.0 {
            black_hole_bounds(b, tol)?
        } else {
            photon_surface_bounds(b, tol)?
        };
        let f0 = b.f0;
        let cells = grid(ctx, b.n, &[2.0], &[(1.0, 0.0 - f0 * f0), (-1.0, 1.0)])?;
        for (p, c, d) in cells {
            let region = admissibility_region(f0, c, d)?;
            if region == Region::Outside {
                return Err(CliError::Config(format!(
                    "(c, d) = ({c}, {d}) is {region} for f0 = {f0}: not admissible"
                )));
            }
            let mut r = parametric_bound(b, &RobinsonParams::new(b.n, p, c, d)?, tol)?;
            r.name = format!("parametric[p={p:?},c={c:?},d={d:?}]");
            reports.push(r);
        }
        for r in &reports {
            report_row(&mut table, i, r);
            if !r.holds() {
                failures.push(Failure {
                    entry: format!("boundary[{i}]"),
                    check: r.name.clone(),
                    value: Some(r.slack),
                    tolerance: Some(tol),
                    detail: format!("lhs {:e}, rhs {:e}", r.lhs, r.rhs),
                });
            }
        }
        results.push(json!({
            "data": i,
            "area_radius": b.area_radius(),
            "mass": b.mass(),
            "reports": reports,
        }));
    }
    ctx.sink.table("boundary", &table)?;
    Ok(summary(ctx, CommandName::Boundary, failures, warnings, Value::from(results)))
}

pub fn catalog(ctx: &Context) -> Result<Summary, CliError> {
    let keys = if ctx.config.entry_keys.is_empty() {
        standard_keys().into_iter().chain(negative_control_keys()).collect()
    } else {
        ctx.config.entry_keys.clone()
    };
    let entries = resolve_entries(&keys)?;
    let s = &ctx.config.point_sampling;
    let checks = exec::map(Execution::Parallel, &entries, |e| validate_entry(e, s.count, s.seed));
    let mut table = Table::new(vec![
        "entry", "dim", "expected_vacuum", "expected_t_zero", "max_vacuum_residual", "max_t_norm2", "vacuum_confirmed",
        "t_zero_confirmed",
    ]);
    let mut failures = Vec::new();
    let mut results = Vec::new();
    for (e, c) in entries.iter().zip(checks) {
        let c = c?;
        table.rows.push(vec![
            Cell::Text(e.key.clone()),
            Cell::Int(e.dim() as u64),
            Cell::Bool(e.expected.vacuum),
            Cell::Bool(e.expected.t_zero),
            Cell::Num(c.max_vacuum_residual),
            Cell::Num(c.max_t_norm2),
            Cell::Bool(c.vacuum_confirmed),
            Cell::Bool(c.t_zero_confirmed),
        ]);
        if !(c.vacuum_confirmed && c.t_zero_confirmed) {
            failures.push(Failure {
                entry: e.key.clone(),
                check: "catalog_self_consistency".into(),
                value: Some(c.max_vacuum_residual),
                tolerance: None,
                detail: "expected flags not confirmed at sampled points".into(),
            });
        }
        results.push(json!({
            "entry": e.key,
            "dim": e.dim(),
            "expected": { "vacuum": e.expected.vacuum, "t_zero": e.expected.t_zero, "classification": e.expected.lambda },
            "has_level_profile": e.profile.is_some(),
            "check": c,
        }));
    }
    ctx.sink.table("catalog", &table)?;
    Ok(summary(ctx, CommandName::Catalog, failures, Vec::new(), Value::from(results)))
}

fn summary(ctx: &Context, command: CommandName, failures: Vec<Failure>, warnings: Vec<String>, results: Value) -> Summary {
    Summary {
        schema_version: SCHEMA_VERSION,
        command,
        tolerances: ctx.tol,
        passed: failures.is_empty(),
        failures,
        warnings,
        results,
    }
}
