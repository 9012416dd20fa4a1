use std::io::Write;

use dieroll::balancing::{self, BalanceResult};
use dieroll::bounds::{self, BoundsRow, QsdEnsemble, QsdError};
use dieroll::cheating::{
    self, default_eps, AliceCertificate, AnalysisMode, AnalysisOptions, CertificateForm, CheatReport, KnownAnalysis,
    SolverValue,
};
use dieroll::matlin::CMatrix;
use dieroll::protocol::{self, build_subset_protocol, ClassicalSubsetProtocol, DricProtocol};
use dieroll::Rational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::io::{self, Certificate, CertificateJson, EnsembleJson, ProtocolJson, SCHEMA};
use crate::{AnalyzeArgs, CliError, Format, Mode, QsdArgs, SimulateArgs, TableArgs, VerifyArgs};

/// Largest D accepted by `table`.
pub const TABLE_D_CAP: usize = 100_000;

type Result<T> = std::result::Result<T, CliError>;

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    writeln!(out, "{text}").map_err(|e| CliError::Io(e.to_string()))
}

fn emit_json(out: &mut dyn Write, value: &Value) -> Result<()> {
    emit(out, &serde_json::to_string_pretty(value).expect("serializable"))
}

fn no_csv(format: Format, command: &str) -> Result<()> {
    if format == Format::Csv {
        return Err(CliError::Usage(format!("{command} has no csv output; use text or json")));
    }
    Ok(())
}

fn resolve_eps(eps: Option<f64>, d: usize) -> Result<f64> {
    match eps {
        None => Ok(default_eps(d)),
        Some(e) if e.is_finite() && e > 0.0 => Ok(e),
        Some(e) => Err(CliError::Usage(format!("--eps must be positive, got {e}"))),
    }
}

// ---- table ----

const CSV_HEADER: &str = "D,classical_exact,classical_pct,quantum_exact,quantum_pct,kitaev,kitaev_pct,three_message_exact,three_message_pct";

pub fn csv_line(row: &BoundsRow) -> String {
    let [three_message, classical, quantum, kitaev] = row.percentages();
    format!(
        "{},{},{},{},{},{},{},{},{}",
        row.d, row.classical, classical, row.quantum, quantum, row.kitaev, kitaev, row.three_message, three_message
    )
}

pub fn table(args: &TableArgs, out: &mut dyn Write) -> Result<()> {
    if args.d_min < 2 || args.d_max < args.d_min || args.d_max > TABLE_D_CAP {
        return Err(CliError::Usage(format!(
            "need 2 <= d-min <= d-max <= {TABLE_D_CAP}, got {}..{}",
            args.d_min, args.d_max
        )));
    }
    if args.check && (args.d_min > 2 || args.d_max < 10) {
        return Err(CliError::Usage("--check needs the range to cover D = 2..10".into()));
    }
    let rows = bounds::bounds_table(args.d_min, args.d_max);
    let mismatches = if args.check { bounds::check_published(&rows) } else { Vec::new() };

    match args.format {
        Format::Csv => {
            emit(out, CSV_HEADER)?;
            for row in &rows {
                emit(out, &csv_line(row))?;
            }
        }
        Format::Json => {
            let rows_json: Vec<Value> = rows
                .iter()
                .map(|r| {
                    let [three_message, classical, quantum, kitaev] = r.percentages();
                    json!({
                        "D": r.d,
                        "three_message": {"exact": r.three_message.to_string(), "pct": three_message},
                        "classical": {"exact": r.classical.to_string(), "pct": classical},
                        "quantum": {"exact": r.quantum.to_string(), "pct": quantum},
                        "kitaev": {"value": r.kitaev, "pct": kitaev},
                    })
                })
                .collect();
            let mut doc = json!({"schema": SCHEMA, "kind": "table", "rows": rows_json});
            if args.check {
                doc["check"] = json!({
                    "passed": mismatches.is_empty(),
                    "mismatches": mismatches.iter().map(|m| json!({
                        "D": m.d, "row": m.row, "expected": m.expected, "found": m.found
                    })).collect::<Vec<_>>(),
                });
            }
            emit_json(out, &doc)?;
        }
        Format::Text => {
            let width = bounds::ROW_NAMES.iter().map(|s| s.len()).max().unwrap_or(0);
            let mut header = format!("{:width$}", "D");
            for r in &rows {
                header += &format!(" {:>4}", r.d);
            }
            emit(out, &header)?;
            for (k, name) in bounds::ROW_NAMES.iter().enumerate() {
                let mut line = format!("{name:width$}");
                for r in &rows {
                    line += &format!(" {:>4}", r.percentages()[k]);
                }
                emit(out, &line)?;
            }
            if args.check {
                for m in &mismatches {
                    emit(out, &format!("mismatch D={} {}: expected {}, found {}", m.d, m.row, m.expected, m.found))?;
                }
                let verdict = if mismatches.is_empty() { "PASS" } else { "FAIL" };
                emit(out, &format!("check {verdict}: {} of 36 entries differ", mismatches.len()))?;
            }
        }
    }
    if !mismatches.is_empty() {
        return Err(CliError::Check(format!("{} table entries differ from the published values", mismatches.len())));
    }
    Ok(())
}

// ---- analyze ----

fn solver_json(v: &Option<SolverValue>) -> Value {
    match v {
        Some(v) => json!({
            "primal": v.primal, "dual": v.dual, "status": format!("{:?}", v.status), "iterations": v.iterations
        }),
        None => Value::Null,
    }
}

fn balance_json(b: &BalanceResult, certified: (f64, f64)) -> Value {
    let (alice_lemma, bob_lemma) = b.lemma_values();
    json!({
        "direction": b.direction.map(|d| d.name()),
        "t": {"exact": b.t.to_string(), "value": b.t_f64()},
        "alpha": b.alpha.to_string(),
        "beta": b.beta.to_string(),
        "bound": {"exact": b.bound.to_string(), "value": bounds::to_f64(b.bound)},
        "predicted": {"alice": alice_lemma.to_string(), "bob": bob_lemma.to_string()},
        "certified": {"alice": certified.0, "bob": certified.1, "alice_slack": b.alice_certificate.slack},
        "dimA": b.transformed.dims().dim_a,
        "dimB": b.transformed.dims().dim_b,
    })
}

pub fn analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    no_csv(args.format, "analyze")?;
    args.tolerances.validate()?;
    let (d, m) = (args.d, args.m);
    let base = build_subset_protocol(d, m)?;
    let eps = resolve_eps(args.eps, d)?;
    let mode = match args.mode {
        Mode::Solve => AnalysisMode::Solve,
        Mode::Certify => AnalysisMode::ClosedFormIfKnown,
        Mode::Both => AnalysisMode::Both,
    };
    let opts = AnalysisOptions { mode, eps: Some(eps), tol: args.tolerances.tol, solver: args.tolerances.solver() };

    let (target, balanced, known) = if args.balance {
        let bob = cheating::subset_bob_certificate(d, m)?;
        let alice = cheating::subset_alice_certificate(d, m, eps)?;
        let (alpha, beta) = (Rational::new(m as i64, d as i64), Rational::new(1, m as i64));
        let b = balancing::balance(&base, alpha, beta, &bob, &alice)?;
        let certified = b.verify(args.tolerances.tol)?;
        let known = KnownAnalysis {
            bob_certificate: Some(b.bob_certificate.clone()),
            alice_certificate: Some(b.alice_certificate.clone()),
            ..Default::default()
        };
        (b.transformed.clone(), Some((b, certified)), known)
    } else {
        (base.clone(), None, KnownAnalysis::default())
    };
    let report = cheating::analyze_with(&target, &opts, known)?;
    if !report.sandwich_holds(1e-6) {
        return Err(CliError::Numerical(format!(
            "lower and upper bounds disagree: Bob [{}, {}], Alice [{}, {}]",
            report.p_bob_lower, report.p_bob_upper, report.p_alice_lower, report.p_alice_upper
        )));
    }

    if let Some(dir) = &args.emit_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        io::write_json(&dir.join("protocol.json"), &ProtocolJson::from_protocol(&target))?;
        let (bob, alice) = match &balanced {
            Some((b, _)) => (Some(b.bob_certificate.clone()), Some(b.alice_certificate.clone())),
            None => (report.bob_certificate.clone(), report.alice_certificate.clone()),
        };
        if let Some(c) = bob {
            io::write_json(&dir.join("bob_certificate.json"), &CertificateJson::from_bob(&c))?;
        }
        if let Some(c) = alice {
            io::write_json(&dir.join("alice_certificate.json"), &CertificateJson::from_alice(&c))?;
        }
    }

    let (alice_exact, bob_exact) = protocol::classical_cheat_values(&ClassicalSubsetProtocol::new(d, m)?);
    match args.format {
        Format::Json => {
            let mut doc = json!({
                "schema": SCHEMA,
                "kind": "analysis",
                "D": d,
                "m": m,
                "mode": format!("{:?}", args.mode).to_lowercase(),
                "protocol": {
                    "label": target.label(),
                    "origin": target.origin().describe(),
                    "dimA": target.dims().dim_a,
                    "dimB": target.dims().dim_b,
                },
                "bob": {"lower": report.p_bob_lower, "upper": report.p_bob_upper, "solver": solver_json(&report.bob_solver)},
                "alice": {
                    "lower": report.p_alice_lower,
                    "upper": report.p_alice_upper,
                    "certified_slack": report.certified_slack,
                    "solver": solver_json(&report.alice_solver),
                },
                "kitaev_product": report.kitaev_product,
                "subset_exact": {
                    "alice": alice_exact.to_string(),
                    "bob": bob_exact.to_string(),
                    "product": (alice_exact * bob_exact).to_string(),
                },
                "notes": report.notes,
            });
            if let Some((b, certified)) = &balanced {
                doc["balance"] = balance_json(b, *certified);
            }
            emit_json(out, &doc)?;
        }
        _ => write_report_text(out, &target, &report, balanced.as_ref(), (alice_exact, bob_exact))?,
    }
    Ok(())
}

fn write_report_text(
    out: &mut dyn Write,
    p: &DricProtocol,
    r: &CheatReport,
    balanced: Option<&(BalanceResult, (f64, f64))>,
    exact: (Rational, Rational),
) -> Result<()> {
    let dims = p.dims();
    emit(out, &format!("protocol  {} (D={}, dimA={}, dimB={})", p.origin().describe(), r.d, dims.dim_a, dims.dim_b))?;
    emit(out, &format!("bob       {:.9} <= P_B* <= {:.9}", r.p_bob_lower, r.p_bob_upper))?;
    emit(
        out,
        &format!(
            "alice     {:.9} <= P_A* <= {:.9}  (certified slack {:.1e})",
            r.p_alice_lower, r.p_alice_upper, r.certified_slack
        ),
    )?;
    emit(out, &format!("product   {:.9}  (1/D = {:.9})", r.kitaev_product, 1.0 / r.d as f64))?;
    for (who, v) in [("bob", &r.bob_solver), ("alice", &r.alice_solver)] {
        if let Some(v) = v {
            emit(
                out,
                &format!(
                    "solver    {who}: primal {:.9}, dual {:.9} ({:?}, {} iterations)",
                    v.primal, v.dual, v.status, v.iterations
                ),
            )?;
        }
    }
    match balanced {
        Some((b, (alice, bob))) => {
            let dir = b.direction.map_or("none", |d| d.name());
            emit(
                out,
                &format!("balance   {dir}, t = {}, bound = {} ({:.9})", b.t, b.bound, bounds::to_f64(b.bound)),
            )?;
            emit(out, &format!("certified alice <= {alice:.9}, bob <= {bob:.9}, both verified"))?;
        }
        None => {
            let (a, b) = exact;
            emit(out, &format!("exact     P_A* = {a}, P_B* = {b}, product = {}", a * b))?;
        }
    }
    for note in &r.notes {
        emit(out, &format!("note      {note}"))?;
    }
    Ok(())
}

// ---- verify ----

pub fn verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<()> {
    no_csv(args.format, "verify")?;
    if !(args.tol.is_finite() && args.tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be positive, got {}", args.tol)));
    }
    let p = io::read_json::<ProtocolJson>(&args.protocol)?.to_protocol()?;
    let cert = io::read_json::<CertificateJson>(&args.cert)?.to_certificate()?;
    let (party, form, outcome, cross) = match &cert {
        Certificate::Bob(c) => ("bob", "operator", cheating::verify_bob_certificate(&p, c, args.tol), None),
        Certificate::Alice(c) => {
            let outcome = cheating::verify_alice_certificate(&p, c, args.tol);
            match c.form {
                CertificateForm::Operator => ("alice", "operator", outcome, None),
                CertificateForm::Inverse { .. } => {
                    let cross = outcome
                        .as_ref()
                        .ok()
                        .map(|_| cheating::verify_alice_certificate(&p, &c.to_operator_form(), args.tol));
                    ("alice", "inverse", outcome, cross)
                }
            }
        }
    };
    let cross_value = match cross {
        Some(Ok(v)) => Some(v.value),
        Some(Err(cheating::CheatError::DimensionCap { .. })) | None => None,
        Some(Err(e)) => return Err(CliError::Numerical(format!("operator-form cross-check failed: {e}"))),
    };
    let failure = outcome.as_ref().err().map(|e| e.to_string());
    match args.format {
        Format::Json => {
            let mut doc = json!({
                "schema": SCHEMA, "kind": "verification", "party": party, "form": form,
                "passed": outcome.is_ok(),
            });
            match &outcome {
                Ok(v) => {
                    doc["value"] = json!(v.value);
                    doc["worst_margin"] = json!(v.worst_margin);
                    doc["operator_form_value"] = json!(cross_value);
                }
                Err(e) => doc["error"] = json!(e.to_string()),
            }
            emit_json(out, &doc)?;
        }
        _ => match &outcome {
            Ok(v) => {
                emit(out, &format!("{party} certificate ({form} form): PASS"))?;
                emit(out, &format!("value         {:.12}", v.value))?;
                emit(out, &format!("worst margin  {:.3e}", v.worst_margin))?;
                if let Some(x) = cross_value {
                    emit(out, &format!("operator form {x:.12}"))?;
                }
            }
            Err(e) => emit(out, &format!("{party} certificate ({form} form): FAIL: {e}"))?,
        },
    }
    match (outcome, failure) {
        (Ok(_), _) => Ok(()),
        (Err(cheating::CheatError::Shape { .. }), Some(msg)) | (Err(cheating::CheatError::Protocol(_)), Some(msg)) => {
            Err(CliError::Usage(msg))
        }
        (Err(_), msg) => Err(CliError::Check(format!("certificate rejected: {}", msg.unwrap_or_default()))),
    }
}

// ---- qsd ----

fn qsd_error(e: QsdError, user_input: bool) -> CliError {
    match e {
        QsdError::Empty | QsdError::Count { .. } | QsdError::NotDensity { .. } | QsdError::Priors { .. } => {
            CliError::Usage(e.to_string())
        }
        QsdError::DimensionCap { .. } => CliError::Usage(e.to_string()),
        QsdError::WitnessTooLarge { .. } | QsdError::WitnessNotPd { .. } if user_input => CliError::Usage(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    }
}

pub fn qsd(args: &QsdArgs, out: &mut dyn Write) -> Result<()> {
    no_csv(args.format, "qsd")?;
    args.tolerances.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (source, ensemble, witnesses, witness_source, user_witnesses, slack): (
        String,
        QsdEnsemble,
        Vec<CMatrix>,
        String,
        bool,
        f64,
    ) = if let Some(path) = &args.ensemble {
        let (e, w) = io::read_json::<EnsembleJson>(path)?.to_ensemble()?;
        match w {
            Some(w) => (path.display().to_string(), e, w, "file".into(), true, 0.0),
            None => {
                let w = bounds::random_witnesses(&mut rng, e.states());
                (path.display().to_string(), e, w, format!("random(seed={})", args.seed), false, 0.0)
            }
        }
    } else if let Some(dm) = &args.from_protocol {
        let (d, m) = (dm[0], dm[1]);
        let p = build_subset_protocol(d, m)?;
        let eps = resolve_eps(args.eps, d)?;
        let cert: AliceCertificate = cheating::subset_alice_certificate(d, m, eps)?;
        let w = bounds::certificate_to_qsd_witness(&cert, d).map_err(|e| qsd_error(e, false))?;
        let e = QsdEnsemble::uniform(protocol::reduced_states(&p)).map_err(|e| qsd_error(e, false))?;
        (format!("subset(D={d}, m={m})"), e, w, format!("certificate(eps={eps:e})"), false, d as f64 * eps)
    } else {
        if args.n == 0 || args.dim == 0 {
            return Err(CliError::Usage("--n and --dim must be positive".into()));
        }
        let e = bounds::random_ensemble(&mut rng, args.n, args.dim);
        let w = bounds::random_witnesses(&mut rng, e.states());
        (format!("random(seed={}, n={}, dim={})", args.seed, args.n, args.dim), e, w, "random".into(), false, 0.0)
    };
    if let Some(path) = &args.emit_ensemble {
        io::write_json(path, &EnsembleJson::from_ensemble(&ensemble))?;
    }
    let bound = bounds::qsd_lower_bound(&witnesses, ensemble.states()).map_err(|e| qsd_error(e, user_witnesses))?;
    let optimum =
        bounds::qsd_optimum_with(&ensemble, &args.tolerances.solver()).map_err(|e| qsd_error(e, false))?;
    let consistent = bound <= optimum + 1e-7;

    match args.format {
        Format::Json => emit_json(
            out,
            &json!({
                "schema": SCHEMA, "kind": "qsd", "source": source, "witnesses": witness_source,
                "n": ensemble.len(), "dim": ensemble.dim(),
                "optimum": optimum, "bound": bound, "gap": optimum - bound, "epsilon_slack": slack,
                "consistent": consistent,
            }),
        )?,
        _ => {
            emit(out, &format!("source    {source}, {} states of dimension {}", ensemble.len(), ensemble.dim()))?;
            emit(out, &format!("witnesses {witness_source}"))?;
            emit(out, &format!("optimum   {optimum:.9}"))?;
            emit(out, &format!("bound     {bound:.9}"))?;
            emit(out, &format!("gap       {:.3e}", optimum - bound))?;
        }
    }
    if !consistent {
        return Err(CliError::Numerical(format!("lower bound {bound} exceeds the optimum {optimum}")));
    }
    Ok(())
}

// ---- simulate ----

/// Pearson statistic threshold at the 99.9% level with `d − 1` degrees of freedom.
pub fn chi_square_critical(d: usize) -> f64 {
    ChiSquared::new((d - 1) as f64).expect("d >= 2").inverse_cdf(0.999)
}

pub fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    no_csv(args.format, "simulate")?;
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    let report = if args.classical {
        protocol::simulate_honest(&ClassicalSubsetProtocol::new(args.d, args.m)?, args.seed, args.trials)
    } else {
        protocol::simulate_honest(&build_subset_protocol(args.d, args.m)?, args.seed, args.trials)
    };
    let chi2 = report.chi_square();
    let critical = chi_square_critical(args.d);
    let passed = report.aborts == 0 && chi2 <= critical;
    match args.format {
        Format::Json => emit_json(
            out,
            &json!({
                "schema": SCHEMA, "kind": "simulation", "D": args.d, "m": args.m,
                "protocol": if args.classical { "classical" } else { "quantum" },
                "seed": args.seed, "trials": report.trials(), "aborts": report.aborts,
                "histogram": report.histogram, "chi_square": chi2, "critical_999": critical, "passed": passed,
            }),
        )?,
        _ => {
            emit(out, &format!("trials    {} (seed {}), aborts {}", report.trials(), args.seed, report.aborts))?;
            let counts: Vec<String> = report.histogram.iter().map(u64::to_string).collect();
            emit(out, &format!("histogram {}", counts.join(" ")))?;
            emit(out, &format!("chi2      {chi2:.3} (99.9% critical {critical:.3}): {}", if passed { "PASS" } else { "FAIL" }))?;
        }
    }
    if args.check && !passed {
        return Err(CliError::Check(format!("uniformity rejected: chi2 = {chi2:.3} > {critical:.3}")));
    }
    Ok(())
}
