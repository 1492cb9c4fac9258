//! Command dispatch and report documents.

use std::time::Instant;

use dilind_core::dilation::{
    build_witness, certify_independence, decide, necessary_coefficient_checks, DilationEquation, Verdict,
    DEFAULT_TUPLES, DEFAULT_WITNESS_SAMPLES,
};
use dilind_core::functions::Phi;
use dilind_core::measure::norm::{NormMethod, NormParams};
use dilind_core::measure::{lambda_probe, norm_check, ProbeParams, SectionMeasure};
use dilind_core::orbit::{
    build_cross_section, isotropy_of, verify_cross_section, verify_period, CrossSection, IsotropyClass,
    OmegaPredicate,
};
use dilind_core::spectral::{complexify, eigen_decompose, StructuredForm, DEFAULT_CLUSTER_TOL};
use dilind_core::{Complex64, Error, ErrorKind, SquareMatrix};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use crate::csv;
use crate::document::{Command, Mode, ProblemDocument};

pub const TOOL: &str = "dilind";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SECTION_SAMPLES: usize = 1000;
pub const DEFAULT_NORM_SAMPLES: usize = 100_000;
pub const DEFAULT_PROBE_POINTS: usize = 1000;
pub const PERIOD_GRID: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub tolerances: serde_json::Map<String, Value>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub input: ProblemDocument,
    pub seeds: Vec<u64>,
    pub output: Value,
    pub diagnostics: Diagnostics,
    pub duration_ms: f64,
}

/// A module error tagged with where it was raised.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandError {
    pub error: Error,
    pub module: &'static str,
    pub operation: &'static str,
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self.error.kind() {
            ErrorKind::Validation => 2,
            ErrorKind::NumericalRefusal => 3,
            ErrorKind::PropertyViolation => 4,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "tool": TOOL,
            "version": VERSION,
            "error": {
                "tag": self.error.tag(),
                "message": self.error.to_string(),
                "module": self.module,
                "operation": self.operation,
            },
            "exitCode": self.exit_code(),
        })
    }
}

trait At<T> {
    fn at(self, module: &'static str, operation: &'static str) -> Result<T, CommandError>;
}

impl<T> At<T> for Result<T, Error> {
    fn at(self, module: &'static str, operation: &'static str) -> Result<T, CommandError> {
        self.map_err(|error| CommandError {
            error,
            module,
            operation,
        })
    }
}

/// Output of a command: the report and, for sample-producing commands, CSV text.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: ReportDocument,
    pub csv: Option<String>,
}

struct Context {
    doc: ProblemDocument,
    a: SquareMatrix,
    form: StructuredForm,
    tolerances: serde_json::Map<String, Value>,
    warnings: Vec<String>,
}

impl Context {
    fn new(doc: &ProblemDocument) -> Result<Self, CommandError> {
        let form = match (doc.mode, &doc.matrix, &doc.blocks) {
            (Mode::General, Some(rows), _) => {
                let a = SquareMatrix::from_rows(rows).at("spectral-core", "parse_matrix")?;
                complexify(&a, DEFAULT_CLUSTER_TOL).at("spectral-core", "complexify")?.1
            }
            (Mode::Structured, _, Some(spec)) => {
                let basis = spec.basis.as_ref().map(|rows| {
                    DMatrix::from_row_iterator(rows.len(), rows.len(), rows.iter().flatten().copied())
                });
                StructuredForm::from_blocks(spec.real.clone(), spec.upper.clone(), basis)
                    .at("spectral-core", "structured_form")?
            }
            _ => {
                return Err(CommandError {
                    error: Error::InvalidInput("matrix or block specification required".into()),
                    module: "cli-io",
                    operation: "parse_problem",
                })
            }
        };
        let mut tolerances = serde_json::Map::new();
        tolerances.insert("clusterTolerance".into(), json!(DEFAULT_CLUSTER_TOL));
        Ok(Context {
            doc: doc.clone(),
            a: form.generator().clone(),
            form,
            tolerances,
            warnings: Vec::new(),
        })
    }

    fn tol(&mut self, key: &str, value: f64) {
        self.tolerances.insert(key.into(), json!(value));
    }

    fn seed(&self) -> u64 {
        self.doc.seed.unwrap_or(0)
    }

    fn isotropy(&self) -> Result<(IsotropyClass, Option<Value>), CommandError> {
        let (iso, rel) = isotropy_of(&self.form).at("orbit-geometry", "classify_isotropy")?;
        Ok((iso, rel.map(|r| serde_json::to_value(r).unwrap())))
    }

    fn section(&self, iso: &IsotropyClass) -> Result<CrossSection, CommandError> {
        build_cross_section(&self.form, iso).at("orbit-geometry", "build_cross_section")
    }

    fn phi(&self) -> Result<Phi, CommandError> {
        let def = self.doc.function.clone().expect("validated");
        Phi::new(def, self.a.dim()).at("measure-verify", "test_function")
    }

    fn equation(&self) -> Result<DilationEquation, CommandError> {
        let coefficients = self
            .doc
            .coefficients
            .as_ref()
            .map(|c| c.iter().map(|&z| Complex64::from(z)).collect());
        DilationEquation::new(
            self.a.clone(),
            self.doc.times.clone().unwrap_or_default(),
            coefficients,
            self.doc.p.unwrap_or(1.0),
        )
        .at("dilation-analysis", "dilation_equation")
    }
}

fn section_summary(cs: &CrossSection) -> Value {
    json!({
        "case": cs.case(),
        "pivot": cs.pivot(),
        "eigenvalue": {"re": cs.eigenvalue().re, "im": cs.eigenvalue().im},
        "formula": cs.formula().render(),
        "iotaFormula": cs.iota_formula(),
        "coefficients": cs.formula(),
        "omega": cs.omega(),
    })
}

fn form_summary(form: &StructuredForm) -> Value {
    let j = form.jordan();
    let rows: Vec<Vec<Value>> = (0..j.nrows())
        .map(|i| (0..j.ncols()).map(|k| json!({"re": j[(i, k)].re, "im": j[(i, k)].im})).collect())
        .collect();
    json!({
        "source": form.source(),
        "embedding": form.embedding(),
        "realBlocks": form.real_blocks(),
        "upperBlocks": form.upper_blocks(),
        "jordan": rows,
        "condition": form.condition(),
        "residual": form.residual(),
    })
}

fn analyze(ctx: &mut Context) -> Result<Value, CommandError> {
    let eigen = eigen_decompose(&ctx.a, DEFAULT_CLUSTER_TOL).at("spectral-core", "eigen_decompose")?;
    let mut out = json!({
        "dimension": ctx.a.dim(),
        "trace": ctx.a.trace(),
        "eigenstructure": eigen,
        "form": form_summary(&ctx.form),
    });
    match isotropy_of(&ctx.form) {
        Ok((iso, rel)) => {
            out["isotropy"] = json!(iso);
            out["orbitClass"] = json!(iso.orbit_class());
            out["rationalRelation"] = json!(rel);
            match iso {
                IsotropyClass::Lattice { period } => {
                    let check = verify_period(&ctx.a, period, PERIOD_GRID).at("orbit-geometry", "verify_period")?;
                    out["periodCheck"] = json!(check);
                }
                IsotropyClass::Trivial => out["crossSection"] = section_summary(&ctx.section(&iso)?),
                IsotropyClass::FullLine => {}
            }
        }
        Err(e @ Error::NotRationallyRelated { .. }) => {
            ctx.warnings.push(e.to_string());
            out["isotropy"] = Value::Null;
        }
        Err(e) => return Err(e).at("orbit-geometry", "classify_isotropy"),
    }
    Ok(out)
}

fn cross_section(ctx: &mut Context) -> Result<Value, CommandError> {
    let (iso, _) = ctx.isotropy()?;
    let cs = ctx.section(&iso)?;
    let samples = ctx.doc.samples.unwrap_or(DEFAULT_SECTION_SAMPLES);
    let report = verify_cross_section(&cs, &ctx.a, samples, ctx.seed()).at("orbit-geometry", "verify_cross_section")?;
    ctx.tol("sectionResidual", report.section_tolerance);
    ctx.tol("property", report.property_tolerance);
    Ok(json!({
        "isotropy": iso,
        "crossSection": section_summary(&cs),
        "verification": report,
    }))
}

fn verdict_json(v: &Verdict) -> Value {
    let mut out = serde_json::to_value(v).unwrap();
    match v {
        Verdict::NoNontrivialSolution { reasons } => {
            out["statements"] = json!(reasons.iter().map(|r| r.statement()).collect::<Vec<_>>());
        }
        Verdict::Undetermined { necessary_conditions } => {
            out["statements"] = json!(necessary_conditions.iter().map(|c| c.statement()).collect::<Vec<_>>());
        }
        _ => {}
    }
    out
}

fn decide_command(ctx: &mut Context) -> Result<Value, CommandError> {
    let eq = ctx.equation()?;
    let (iso, _) = ctx.isotropy()?;
    let samples = ctx.doc.samples.unwrap_or(DEFAULT_WITNESS_SAMPLES);
    let verdict = decide(&eq, &ctx.form, &iso, samples, ctx.seed()).at("dilation-analysis", "decide")?;
    ctx.tol("trace", dilind_core::dilation::verdict::TRACE_TOL);
    let mut out = json!({
        "isotropy": iso,
        "trace": ctx.a.trace(),
        "m": eq.m(),
        "p": eq.p(),
        "verdict": verdict_json(&verdict),
    });
    if let (Some(c), Some(_)) = (eq.coefficients(), &ctx.doc.function) {
        let info = ctx.phi()?.info();
        let checks = necessary_coefficient_checks(c, &eq, &info).at("dilation-analysis", "necessary_coefficient_checks")?;
        out["coefficientChecks"] = json!(checks);
    } else if eq.coefficients().is_some() {
        ctx.warnings
            .push("coefficient checks need a function to know phi(0) and its sign".into());
    }
    Ok(out)
}

fn witness_command(ctx: &mut Context) -> Result<Value, CommandError> {
    let (iso, _) = ctx.isotropy()?;
    let IsotropyClass::Lattice { period } = iso else {
        return Err(Error::NotLattice { isotropy: iso.name() }).at("dilation-analysis", "build_witness");
    };
    let samples = ctx.doc.samples.unwrap_or(DEFAULT_WITNESS_SAMPLES);
    let w = build_witness(&ctx.form, &iso, samples, ctx.seed()).at("dilation-analysis", "build_witness")?;
    let check = verify_period(&ctx.a, period, PERIOD_GRID).at("orbit-geometry", "verify_period")?;
    ctx.tol("adaptedNorm", dilind_core::dilation::witness::ADAPTED_NORM_TOL);
    ctx.tol("periodClosure", dilind_core::orbit::isotropy::PERIOD_CLOSURE_TOL);
    Ok(json!({
        "isotropy": iso,
        "periodCheck": check,
        "function": w.function(),
        "witness": w,
    }))
}

fn certify_command(ctx: &mut Context) -> Result<Value, CommandError> {
    let eq = ctx.equation()?;
    let phi = ctx.phi()?;
    let budget = ctx.doc.samples.unwrap_or(DEFAULT_TUPLES);
    let outcome = certify_independence(&phi, &eq, budget, ctx.seed()).at("dilation-analysis", "certify_independence")?;
    ctx.tol("sigmaMinRatio", dilind_core::dilation::certificate::SIGMA_MIN_RATIO);
    ctx.tol("maxCondition", dilind_core::dilation::certificate::MAX_CONDITION);
    Ok(json!({ "outcome": outcome }))
}

fn verify_norm(ctx: &mut Context, want_csv: bool) -> Result<(Value, Option<String>), CommandError> {
    let (iso, _) = ctx.isotropy()?;
    let cs = ctx.section(&iso)?;
    let measure = SectionMeasure::new(&cs).at("measure-verify", "section_measure")?;
    let phi = ctx.phi()?;
    let p = ctx.doc.p.expect("validated");
    let seed = ctx.seed();
    let params = match ctx.doc.method.unwrap_or(NormMethod::MonteCarlo) {
        NormMethod::MonteCarlo => NormParams::monte_carlo(ctx.doc.samples.unwrap_or(DEFAULT_NORM_SAMPLES), seed),
        NormMethod::Quadrature => {
            let mut q = NormParams::quadrature(seed);
            if let Some(n) = ctx.doc.samples {
                q.quadrature_nodes = n;
            }
            q
        }
    };
    let (report, records) = norm_check(&phi, &measure, p, &params, want_csv).at("measure-verify", "norm_check")?;
    if report.truncated > 0 {
        ctx.warnings
            .push(format!("{} right-side draws dropped as overflowing", report.truncated));
    }
    ctx.tol("minEssFraction", dilind_core::measure::norm::MIN_ESS_FRACTION);
    let csv = records.map(|r| csv::samples(&r, ctx.a.dim()));
    Ok((
        json!({
            "crossSection": section_summary(&cs),
            "norms": report,
        }),
        csv,
    ))
}

fn probe_command(ctx: &mut Context, want_csv: bool) -> Result<(Value, Option<String>), CommandError> {
    let (iso, _) = ctx.isotropy()?;
    let omega = match iso {
        IsotropyClass::Trivial => ctx.section(&iso)?.omega().clone(),
        _ => {
            ctx.warnings
                .push("action is not free; restrictions are periodic and the window is not widened".into());
            OmegaPredicate::lattice(&ctx.form)
        }
    };
    let phi = ctx.phi()?;
    let mut params = ProbeParams::new(ctx.doc.samples.unwrap_or(DEFAULT_PROBE_POINTS), ctx.seed());
    if let Some(w) = ctx.doc.window {
        params.window = w;
    }
    if let Some(g) = ctx.doc.grid {
        params.grid = g;
    }
    let mut report = lambda_probe(&phi, &ctx.form, &iso, &omega, ctx.doc.p.expect("validated"), &params)
        .at("measure-verify", "lambda_probe")?;
    ctx.tol("tailFraction", report.tail_fraction);
    ctx.tol("massRatio", report.mass_ratio_tol);
    let csv = want_csv.then(|| csv::probe_points(&report.points, ctx.a.dim()));
    report.points.clear();
    Ok((json!({ "probe": report }), csv))
}

fn export_orbit(ctx: &mut Context) -> Result<(Value, String), CommandError> {
    let v = ctx.doc.point.clone().expect("validated");
    let grid = ctx.doc.t_grid.expect("validated").points();
    let section = match isotropy_of(&ctx.form) {
        Ok((iso @ IsotropyClass::Trivial, _)) => Some(ctx.section(&iso)?),
        _ => None,
    };
    let text = csv::orbit(&ctx.a, &v, &grid, section.as_ref()).at("cli-io", "export_orbit_samples")?;
    Ok((
        json!({
            "rows": grid.len(),
            "formula": section.as_ref().map(|cs| cs.formula().render()),
        }),
        text,
    ))
}

/// Runs `doc`; `want_csv` requests per-sample dumps where a command has them.
pub fn run_command(doc: &ProblemDocument, want_csv: bool) -> Result<RunOutput, CommandError> {
    let start = Instant::now();
    let mut ctx = Context::new(doc)?;
    let (output, csv) = match doc.command {
        Command::Analyze => (analyze(&mut ctx)?, None),
        Command::CrossSection => (cross_section(&mut ctx)?, None),
        Command::Decide => (decide_command(&mut ctx)?, None),
        Command::Witness => (witness_command(&mut ctx)?, None),
        Command::Certify => (certify_command(&mut ctx)?, None),
        Command::VerifyNorm => verify_norm(&mut ctx, want_csv)?,
        Command::LambdaProbe => probe_command(&mut ctx, want_csv)?,
        Command::ExportOrbit => {
            let (out, text) = export_orbit(&mut ctx)?;
            (out, Some(text))
        }
    };
    let report = ReportDocument {
        tool: TOOL.into(),
        version: VERSION.into(),
        command: doc.command.name().into(),
        input: doc.clone(),
        seeds: doc.seed.into_iter().collect(),
        output,
        diagnostics: Diagnostics {
            tolerances: ctx.tolerances,
            warnings: ctx.warnings,
        },
        duration_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(RunOutput { report, csv })
}
