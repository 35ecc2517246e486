use std::path::Path;

use anyhow::{bail, Context, Result};
use handlebody::graphgroups::JordanTable;
use handlebody::schottky::LimitSetSample;
use handlebody::*;
use num_bigint::BigUint;
use serde_json::{json, Value};

use crate::args::{Command, FamilyCmd, GogCmd, SchottkyCmd};
use crate::io::{load_json, write_json};
use crate::report::Outcome;

pub struct Env<'a> {
    pub cfg: ToleranceConfig,
    pub table: &'a JordanTable,
    pub seed: u64,
    pub out: Option<&'a Path>,
}

fn outcome(inputs: Value, outputs: Value, failures: Vec<String>) -> Outcome {
    Outcome {
        inputs,
        outputs,
        failures,
        out_used: false,
    }
}

pub fn run(cmd: &Command, ctx: &Env) -> Result<Outcome> {
    match cmd {
        Command::Gog { cmd } => gog(cmd, ctx),
        Command::Bounds { g, dim, jordan_c } => bounds(g, *dim, jordan_c, ctx),
        Command::Family { cmd } => family(cmd, ctx),
        Command::Realize { k, m, p, odd, .. } => realize_cmd(*k, *m, *p, *odd, ctx),
        Command::Verify { file } => verify(file, ctx),
        Command::KernelSample {
            file,
            count,
            maxlen,
        } => kernel(file, *count, *maxlen, ctx),
        Command::Schottky { cmd } => schottky(cmd, ctx),
    }
}

fn lemma3_all(
    graph: &GraphOfGroups,
    n: &BigUint,
    only: Option<u64>,
) -> Result<(Vec<Lemma3Report>, Vec<String>)> {
    let ids: Vec<u64> = match only {
        Some(e) => vec![e],
        None => graph.edges().iter().map(|e| e.id).collect(),
    };
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for id in ids {
        let r = lemma3_check(graph, id, n)?;
        if !r.pass() {
            failures.push(format!("lemma3 edge {id} ({}): n/a = {}", r.case, r.ratio));
        }
        reports.push(r);
    }
    Ok((reports, failures))
}

fn gog(cmd: &GogCmd, ctx: &Env) -> Result<Outcome> {
    match cmd {
        GogCmd::Chi { file } => {
            let g: GraphOfGroups = load_json(file)?;
            Ok(outcome(
                json!({ "file": file }),
                json!({
                    "chi": euler_characteristic(&g).to_string(),
                    "vertices": g.vertices().len(),
                    "edges": g.edges().len(),
                    "normal_form": g.is_normal_form(),
                    "trivial_edges": g.trivial_edges(),
                    "order_lcm": g.order_lcm().to_string(),
                }),
                vec![],
            ))
        }
        GogCmd::Genus { file, n } => {
            let g: GraphOfGroups = load_json(file)?;
            let genus = genus_of_kernel(&g, n)?;
            Ok(outcome(
                json!({ "file": file, "n": n.to_string() }),
                json!({ "chi": euler_characteristic(&g).to_string(), "genus": genus.to_string() }),
                vec![],
            ))
        }
        GogCmd::Lemma3 { file, n, edge } => {
            let g: GraphOfGroups = load_json(file)?;
            let (reports, failures) = lemma3_all(&g, n, *edge)?;
            Ok(outcome(
                json!({ "file": file, "n": n.to_string(), "edge": edge }),
                json!({ "reports": reports }),
                failures,
            ))
        }
        GogCmd::Collapse { file } => {
            let g: GraphOfGroups = load_json(file)?;
            let c = collapse_trivial_edges(&g);
            let (before, after) = (euler_characteristic(&g), euler_characteristic(&c));
            let failures = if before == after {
                vec![]
            } else {
                vec![format!("collapse changed chi from {before} to {after}")]
            };
            Ok(outcome(
                json!({ "file": file }),
                json!({
                    "removed_edges": g.trivial_edges(),
                    "chi": after.to_string(),
                    "normal_form": c.is_normal_form(),
                    "graph": c,
                }),
                failures,
            ))
        }
        GogCmd::Random {
            max_vertices,
            max_order,
        } => {
            let (g, n) = random_gog(ctx.seed, *max_vertices, *max_order)?;
            let genus = genus_of_kernel(&g, &n)?;
            let (reports, failures) = lemma3_all(&g, &n, None)?;
            Ok(outcome(
                json!({ "max_vertices": max_vertices, "max_order": max_order }),
                json!({
                    "graph": g,
                    "n": n.to_string(),
                    "chi": euler_characteristic(&g).to_string(),
                    "genus": genus.to_string(),
                    "lemma3": reports,
                }),
                failures,
            ))
        }
    }
}

fn bounds(g: &BigUint, d: u32, c: &BigUint, ctx: &Env) -> Result<Outcome> {
    let report = refined_bound(g, d, c)?;
    let corollary = corollary_bounds(g, d, c, ctx.table)?;
    let failures = if report.refined_le_crude {
        vec![]
    } else {
        vec!["refined bound exceeds crude bound".into()]
    };
    Ok(outcome(
        json!({ "g": g.to_string(), "dim": d, "jordan_c": c.to_string() }),
        json!({ "bounds": report, "corollary": corollary }),
        failures,
    ))
}

fn build_family(k: u32, m: Option<u64>, p: Option<u64>) -> Result<StarFamily> {
    Ok(match (m, p) {
        (Some(m), None) => abelian_star(k, m)?,
        (None, Some(p)) => cyclic_star(k, p)?,
        _ => bail!("exactly one of --m and --p is required"),
    })
}

fn parity(odd: bool) -> Parity {
    if odd {
        Parity::Odd
    } else {
        Parity::Even
    }
}

fn family(cmd: &FamilyCmd, _ctx: &Env) -> Result<Outcome> {
    let (f, odd) = match cmd {
        FamilyCmd::Abelian { k, m, odd } => (abelian_star(*k, *m)?, *odd),
        FamilyCmd::Cyclic { k, p, odd } => (cyclic_star(*k, *p)?, *odd),
    };
    let d = parity(odd).dim(f.k()) as u32;
    let eff = effectiveness_check(&f);
    let (lemma3, mut failures) = lemma3_all(f.graph(), f.n(), None)?;
    let bound = refined_bound(f.g(), d, &BigUint::from(1u8))?;
    if !eff.pass {
        failures.push("effectiveness: edge groups intersect nontrivially".into());
    }
    let within = f.n() <= &bound.refined;
    if !within {
        failures.push(format!(
            "n = {} exceeds refined bound {}",
            f.n(),
            bound.refined
        ));
    }
    Ok(outcome(
        json!({ "kind": f.kind().to_string(), "k": f.k(), "parameter": f.parameter(), "dim": d }),
        json!({
            "family": f,
            "n": f.n().to_string(),
            "g": f.g().to_string(),
            "effectiveness": eff,
            "lemma3": lemma3,
            "bounds": bound,
            "n_within_refined": within,
        }),
        failures,
    ))
}

fn verification_failures(report: &VerificationReport) -> Vec<String> {
    report
        .failures()
        .map(|c| {
            format!(
                "{}: value {:e}, tolerance {:e}",
                c.name, c.value, c.tolerance
            )
        })
        .collect()
}

fn verification_summary(report: &VerificationReport) -> Value {
    json!({
        "pass": report.pass,
        "checks": report.checks.len(),
        "self_separation_checks": report.self_separation_checks,
        "cross_separation_checks": report.cross_separation_checks,
        "failed": report.failures().map(|c| &c.name).collect::<Vec<_>>(),
        "results": report.checks,
    })
}

fn realize_cmd(k: u32, m: Option<u64>, p: Option<u64>, odd: bool, ctx: &Env) -> Result<Outcome> {
    let f = build_family(k, m, p)?;
    let r = realize(&f, parity(odd), &ctx.cfg, ctx.seed)?;
    let report = r
        .verification()
        .context("realization carries no verification")?;
    let failures = verification_failures(report);
    let outputs = json!({
        "n": f.n().to_string(),
        "g": f.g().to_string(),
        "dim": r.dim(),
        "min_offsets": r.min_offsets(),
        "offsets": r.offsets(),
        "verification": verification_summary(report),
    });
    if let Some(out) = ctx.out {
        write_json(out, &r)?;
    }
    Ok(Outcome {
        inputs: json!({ "kind": f.kind().to_string(), "k": k, "parameter": f.parameter(), "odd": odd }),
        outputs,
        failures,
        out_used: true,
    })
}

fn verify(file: &Path, ctx: &Env) -> Result<Outcome> {
    let mut r: RealizedExtension = load_json(file)?;
    let stored = r.verification().map(|v| v.pass);
    let report = r.reverify(&ctx.cfg).clone();
    let mut failures = verification_failures(&report);
    let chain = if report.pass {
        let chain = fixed_dim_chain(&r, &ctx.cfg)?;
        failures.extend(chain.violations.iter().map(|v| format!("chain: {v}")));
        Some(chain)
    } else {
        None
    };
    Ok(outcome(
        json!({ "file": file }),
        json!({
            "dim": r.dim(),
            "stored_pass": stored,
            "pass": report.pass,
            "matches_stored": stored.is_none_or(|s| s == report.pass),
            "verification": verification_summary(&report),
            "chain": chain,
        }),
        failures,
    ))
}

fn kernel(file: &Path, count: usize, maxlen: usize, ctx: &Env) -> Result<Outcome> {
    let mut r: RealizedExtension = load_json(file)?;
    let report = r.reverify(&ctx.cfg).clone();
    let inputs = json!({ "file": file, "count": count, "maxlen": maxlen });
    if !report.pass {
        return Ok(outcome(
            inputs,
            json!({ "verification": verification_summary(&report) }),
            verification_failures(&report),
        ));
    }
    let samples = kernel_sampler(&r, count, maxlen, ctx.seed, &ctx.cfg)?;
    let failures: Vec<String> = samples
        .iter()
        .filter(|s| s.class.has_finite_order_type())
        .map(|s| format!("kernel word {} is {}", s.word, s.class))
        .collect();
    let loxodromic = samples
        .iter()
        .filter(|s| s.class == IsometryClass::Loxodromic)
        .count();
    Ok(outcome(
        inputs,
        json!({
            "sampled": samples.len(),
            "loxodromic": loxodromic,
            "parabolic": samples.iter().filter(|s| s.class == IsometryClass::Parabolic).count(),
            "finite_order": failures.len(),
            "samples": samples,
        }),
        failures,
    ))
}

fn certificate_failures(c: &Certificate) -> Vec<String> {
    match c {
        Certificate::Certified { .. } => vec![],
        other => vec![format!("ping-pong certificate: {}", other.status())],
    }
}

fn schottky(cmd: &SchottkyCmd, ctx: &Env) -> Result<Outcome> {
    match cmd {
        SchottkyCmd::Random {
            genus,
            dim,
            separation,
        } => {
            let s = random_classical_schottky(*genus, *dim, ctx.seed, *separation, &ctx.cfg)?;
            if let Some(out) = ctx.out {
                write_json(out, &s)?;
            }
            Ok(Outcome {
                inputs: json!({ "genus": genus, "dim": dim, "separation": separation }),
                outputs: json!({ "certificate": s.certificate().status() }),
                failures: certificate_failures(s.certificate()),
                out_used: true,
            })
        }
        SchottkyCmd::Certify { file, maxlen } => {
            let mut s: SchottkyGroup = load_json(file)?;
            let stored = s.certificate().status();
            let mut failures = certificate_failures(s.certify(&ctx.cfg));
            let audit = nonidentity_audit(&s, *maxlen, &ctx.cfg);
            failures.extend(
                audit
                    .fixed_origin
                    .iter()
                    .map(|w| format!("word {w} fixes the origin")),
            );
            Ok(outcome(
                json!({ "file": file, "maxlen": maxlen }),
                json!({
                    "genus": s.genus(),
                    "dim": s.dim(),
                    "stored_certificate": stored,
                    "certificate": s.certificate(),
                    "audit": {
                        "words_checked": audit.words_checked,
                        "min_displacement": audit.min_displacement,
                        "tolerance": audit.tolerance,
                        "pass": audit.pass(),
                    },
                }),
                failures,
            ))
        }
        SchottkyCmd::Limitset { file, depth } => {
            let s: SchottkyGroup = load_json(file)?;
            let sample = limit_set_sample(&s, *depth, &ctx.cfg)?;
            let violations = sample.nesting_violations(&ctx.cfg);
            if let Some(path) = ctx.out {
                write_caps_csv(path, &sample, s.dim())?;
            }
            let failures = violations
                .iter()
                .map(|&i| format!("cap {} not nested in its parent", sample.caps[i].word))
                .collect();
            Ok(Outcome {
                inputs: json!({ "file": file, "depth": depth }),
                outputs: json!({
                    "caps": sample.caps.len(),
                    "max_radius_by_depth": sample.max_radius_by_depth(),
                    "nesting_violations": violations.len(),
                }),
                failures,
                out_used: true,
            })
        }
    }
}

fn write_caps_csv(path: &Path, sample: &LimitSetSample, dim: usize) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut header = vec!["word".to_string()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    header.push("radius".into());
    w.write_record(&header)?;
    for c in &sample.caps {
        let mut row = vec![c.word.to_string()];
        row.extend(c.center.iter().map(|x| x.to_string()));
        row.push(c.radius.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
