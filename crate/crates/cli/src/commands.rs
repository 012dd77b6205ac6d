//! Execution of each subcommand.

use std::sync::Arc;

use etalab::eta::{
    converge_tower, default_s_grid, eta_quadrature, eta_spectral_oracle, QuadraturePlan,
};
use etalab::group::{
    distinguishes, group_constants, injective_radius, separation_rate, sphere_sizes, trace_stabilization, Coeff, ConjClass,
    ConstantsOptions, FinGenGroup, GroupAlgebraElement, QuotientTower,
};
use etalab::spectral::{decay_check, spectrum_on_cover, verify_folding, CoverSpec, ModelOperator};
use etalab::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{
    Command, ConstantsArgs, ConvergeArgs, DecayArgs, DistinguishArgs, EtaArgs, GroupCommand, RunConfig, SeparateArgs,
    SpectrumArgs,
};
use crate::report::{DistinguishReport, Payload, RadiusRow, SelfCheck};

/// Payload plus the warnings and flagged rows for the diagnostics block.
pub struct Outcome {
    pub payload: Payload,
    pub warnings: Vec<String>,
    pub flagged: bool,
    pub flagged_rows: Vec<u32>,
}

impl Outcome {
    fn plain(payload: Payload) -> Self {
        Outcome { payload, warnings: Vec::new(), flagged: false, flagged_rows: Vec::new() }
    }
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let tol = config.tol.unwrap_or(1e-10);
    match &config.command {
        Command::Group(g) => run_group(g, config),
        Command::Spectrum(a) => spectrum(a, tol),
        Command::Eta(a) => eta(a, plan(config)),
        Command::Converge(a) => converge(a, plan(config)),
        Command::Decay(a) => decay(a),
        Command::Selftest => selftest(config.seed),
    }
}

fn plan(config: &RunConfig) -> &QuadraturePlan {
    config.plan.as_ref().expect("eta and converge runs carry a resolved plan")
}

fn parse_group(spec: &str) -> Result<Arc<FinGenGroup>> {
    FinGenGroup::parse(spec)
}

fn parse_tower(group: &Arc<FinGenGroup>, spec: &str, budget: usize) -> Result<QuotientTower> {
    let mut tower = QuotientTower::parse(group.clone(), spec)?;
    tower.quotients = tower.quotients.into_iter().map(|q| q.with_budget(budget)).collect();
    Ok(tower)
}

fn parse_class(group: &Arc<FinGenGroup>, word: &str) -> Result<ConjClass> {
    ConjClass::parse(group.clone(), word).map_err(|e| match e {
        Error::Invalid(m) => Error::Parse(m),
        other => other,
    })
}

fn run_group(cmd: &GroupCommand, config: &RunConfig) -> Result<Outcome> {
    let qbudget = config.budget.quotient_elements;
    match cmd {
        GroupCommand::Constants(a) => constants(a, config),
        GroupCommand::Distinguish(a) => distinguish(a, qbudget),
        GroupCommand::Separate(a) => separate(a, qbudget),
        GroupCommand::Radius(a) => radius(a, qbudget),
    }
}

fn constants(a: &ConstantsArgs, config: &RunConfig) -> Result<Outcome> {
    let group = parse_group(&a.group)?;
    let class = a.class.as_deref().map(|w| parse_class(&group, w)).transpose()?;
    let tower = a.tower.as_deref().map(|t| parse_tower(&group, t, config.budget.quotient_elements)).transpose()?;
    if tower.is_some() && class.is_none() {
        return Err(Error::Parse("--tower needs --class".into()));
    }
    let opts = ConstantsOptions {
        radius: a.radius,
        theta0: a.theta0,
        theta1: a.theta1,
        separation_cap: a.cap,
        bfs_budget: config.budget.bfs_elements,
        ..Default::default()
    };
    let c = group_constants(&group, class.as_ref(), tower.as_ref(), &opts).map_err(|e| match e {
        Error::Invalid(m) => Error::Parse(m),
        other => other,
    })?;
    let mut warnings = Vec::new();
    if c.ball_fit.subexponential {
        warnings.push("ball growth is subexponential; K_Gamma reported as 0".to_string());
    }
    if c.separation.as_ref().is_some_and(|s| s.lower_bound_only) {
        warnings.push("every injective radius hit the cap; the separation rate uses lower bounds".to_string());
    }
    Ok(Outcome { warnings, ..Outcome::plain(Payload::Constants(c)) })
}

fn distinguish(a: &DistinguishArgs, budget: usize) -> Result<Outcome> {
    let group = parse_group(&a.group)?;
    let class = parse_class(&group, &a.class)?;
    let tower = parse_tower(&group, &a.tower, budget)?;
    let words: Vec<String> = a.elements.split(',').map(|w| w.trim().to_string()).filter(|w| !w.is_empty()).collect();
    if words.is_empty() {
        return Err(Error::Parse("--elements needs at least one word".into()));
    }
    let elements = words.iter().map(|w| group.parse_word(w).map(|g| g.canonical)).collect::<Result<Vec<_>>>()?;
    let index = distinguishes(&tower, &class, &elements)?;
    let quotient = index.map(|i| tower.quotients[i].label().to_string());
    let mut warnings = Vec::new();
    if index.is_none() {
        warnings.push("the last quotient of the tower does not separate the elements".to_string());
    }
    let report = DistinguishReport { class: a.class.clone(), tower: a.tower.clone(), elements: words, index, quotient };
    Ok(Outcome { warnings, ..Outcome::plain(Payload::Distinguish(report)) })
}

fn separate(a: &SeparateArgs, budget: usize) -> Result<Outcome> {
    let group = parse_group(&a.group)?;
    let class = parse_class(&group, &a.class)?;
    let tower = parse_tower(&group, &a.tower, budget)?;
    let rep = separation_rate(&tower, &class, a.cap)?;
    let mut warnings = Vec::new();
    if rep.lower_bound_only && !rep.bounded_classes {
        warnings.push("every injective radius hit the cap; the rate uses lower bounds".to_string());
    }
    Ok(Outcome { warnings, ..Outcome::plain(Payload::Separation(rep)) })
}

fn radius(a: &SeparateArgs, budget: usize) -> Result<Outcome> {
    let group = parse_group(&a.group)?;
    let class = parse_class(&group, &a.class)?;
    let tower = parse_tower(&group, &a.tower, budget)?;
    let rows = tower
        .quotients
        .iter()
        .enumerate()
        .map(|(index, q)| {
            Ok(RadiusRow {
                index,
                label: q.label().to_string(),
                order: q.order()?,
                radius: injective_radius(q, &class, a.cap)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Outcome::plain(Payload::Radius(rows)))
}

fn finite_cover(spec: &str) -> Result<u32> {
    match CoverSpec::parse(spec)? {
        CoverSpec::Finite(n) => Ok(n),
        CoverSpec::Line => Err(Error::Parse("this command needs a finite cover".into())),
    }
}

fn spectrum(a: &SpectrumArgs, tol: f64) -> Result<Outcome> {
    let op = ModelOperator::parse(&a.operator)?;
    let n = finite_cover(&a.cover)?;
    let data = spectrum_on_cover(&op, n, a.kmax, tol).map_err(|e| match e {
        Error::Invalid(m) => Error::Parse(m),
        other => other,
    })?;
    let flagged = data.flagged;
    let mut warnings = Vec::new();
    if flagged {
        warnings.push(format!("truncation bound {:.3e} exceeds the tolerance", data.truncation_bound));
    }
    if data.zero_modes > 0 {
        warnings.push(format!("{} zero modes", data.zero_modes));
    }
    Ok(Outcome { payload: Payload::Spectrum(data), warnings, flagged, flagged_rows: Vec::new() })
}

fn eta(a: &EtaArgs, plan: &QuadraturePlan) -> Result<Outcome> {
    let op = ModelOperator::parse(&a.operator)?;
    let cover = CoverSpec::parse(&a.cover)?;
    let r = eta_quadrature(&op, cover, a.class, plan)?;
    let mut warnings = Vec::new();
    if r.flagged {
        warnings.push(format!("certified error {:.3e} exceeds flag tolerance {:.1e}", r.total_error(), plan.flag_tol));
    }
    if r.zero_modes > 0 {
        warnings.push(format!("{} zero modes excluded (sign(0) = 0)", r.zero_modes));
    }
    let flagged = r.flagged;
    Ok(Outcome { payload: Payload::Eta(r), warnings, flagged, flagged_rows: Vec::new() })
}

fn converge(a: &ConvergeArgs, plan: &QuadraturePlan) -> Result<Outcome> {
    let op = ModelOperator::parse(&a.operator)?;
    let levels = etalab::group::parse_levels(&a.tower)?;
    if levels.len() < 2 {
        return Err(Error::Parse("a tower needs at least two covers".into()));
    }
    let tower = levels
        .iter()
        .map(|&n| u32::try_from(n).ok().filter(|&n| n > 0).ok_or_else(|| Error::Parse(format!("bad cover degree {n}"))))
        .collect::<Result<Vec<u32>>>()?;
    let rep = converge_tower(&op, &tower, a.class, plan)?;
    let mut warnings: Vec<String> = rep.line_note.iter().cloned().collect();
    if rep.eventually_decreasing == Some(false) {
        warnings.push("abs_diff is not eventually decreasing".to_string());
    }
    let flagged_rows = rep.flagged_rows.clone();
    let flagged = !flagged_rows.is_empty() || rep.line_value.as_ref().is_some_and(|l| l.flagged);
    Ok(Outcome { payload: Payload::Convergence(rep), warnings, flagged, flagged_rows })
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|_| Error::Parse(format!("bad {what} {p:?}"))))
        .collect()
}

fn decay(a: &DecayArgs) -> Result<Outcome> {
    let op = ModelOperator::parse(&a.operator)?;
    let cover = CoverSpec::parse(&a.cover)?;
    let t_grid: Vec<f64> = parse_list(&a.t_grid, "time")?;
    let classes: Vec<i64> = parse_list(&a.classes, "class")?;
    let fit = decay_check(&op, cover, &t_grid, &classes, a.mu).map_err(|e| match e {
        Error::Invalid(m) => Error::Parse(m),
        other => other,
    })?;
    Ok(Outcome::plain(Payload::Decay(fit)))
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> SelfCheck {
    let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    SelfCheck { name: name.to_string(), pass, detail }
}

fn selftest(seed: u64) -> Result<Outcome> {
    let mut checks = Vec::new();
    checks.push(check("sl2z_psi_values", || {
        let sl = FinGenGroup::sl2z();
        let table = [("x", 3), ("x^2", 6), ("x^3", 9), ("y", 2), ("y^2", 4), ("y^3", 6), ("y^4", 8), ("y^5", 10)];
        let mut ok = sl.sl2z_psi(&sl.identity())? == 0;
        for (w, v) in table {
            ok &= sl.sl2z_psi(&sl.parse_word(w)?.canonical)? == v;
        }
        Ok((ok, "psi(x^k), psi(y^k) against the table".to_string()))
    }));
    checks.push(check("free_group_balls", || {
        let f2 = FinGenGroup::free(2)?;
        let spheres = sphere_sizes(&f2, 6)?;
        let ok = spheres.iter().enumerate().all(|(n, &s)| s == if n == 0 { 1 } else { 4 * 3u64.pow(n as u32 - 1) });
        Ok((ok, format!("sphere sizes {spheres:?}")))
    }));
    checks.push(check("folding", || {
        let op = ModelOperator::parse("comp=2,m=1,c=0.3,theta=0.25")?;
        let dev = verify_folding(&op, 2, 1.0, &[(0.1, 0.3), (0.7, 1.6)], 1e-13)?;
        Ok((dev <= 1e-10, format!("max deviation {dev:.3e}")))
    }));
    checks.push(check("dual_method_eta", || {
        let op = ModelOperator::parse("comp=1,c=0.3,theta=0.25")?;
        let q = eta_quadrature(&op, CoverSpec::Finite(2), 1, &QuadraturePlan::default())?;
        let o = eta_spectral_oracle(&op, 2, 1, &default_s_grid(&op))?;
        let d = (q.complex() - o.complex()).norm();
        Ok((d <= 1e-6, format!("|quadrature - oracle| {d:.3e}")))
    }));
    checks.push(check("chirality", || {
        let op = ModelOperator::parse("comp=2,m=1,c=0,theta=0.25,v=0.2cos1")?;
        let r = eta_quadrature(&op, CoverSpec::Finite(3), 1, &QuadraturePlan::default())?;
        let v = r.complex().norm();
        Ok((v <= 1e-8, format!("|eta| {v:.3e}")))
    }));
    checks.push(check("trace_stabilization", || {
        let sl = FinGenGroup::sl2z();
        let class = ConjClass::parse(sl.clone(), "x")?;
        let tower = QuotientTower::parse(sl.clone(), "tower:congruence-psi:2..4")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ok = true;
        for _ in 0..10 {
            let f = GroupAlgebraElement::from_terms((0..4).map(|_| {
                let word: Vec<usize> = (0..rng.gen_range(0..=4)).map(|_| rng.gen_range(0..sl.num_generators())).collect();
                (sl.evaluate(&word), Coeff::new(rng.gen_range(-5i64..=5).into(), 0.into()))
            }));
            ok &= trace_stabilization(&f, &tower, &class)?.index == Some(0);
        }
        Ok((ok, format!("10 random elements, seed {seed}")))
    }));
    let mut warnings = Vec::new();
    for c in checks.iter().filter(|c| !c.pass) {
        warnings.push(format!("check {} failed: {}", c.name, c.detail));
    }
    Ok(Outcome { payload: Payload::Selftest(checks), warnings, flagged: false, flagged_rows: Vec::new() })
}
