use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use qwalk_core::cv::{self, ModelParams};
use qwalk_core::decoherence::{self, DephasingRate, HybridDensity};
use qwalk_core::io::{self as qio, format_number, DistributionDocument};
use qwalk_core::readout::{self, Protocol, ProtocolConfig, ReadoutCurve, Tier};
use qwalk_core::walk::{self, classical_circle_distribution, classical_line_distribution};
use qwalk_core::wigner::{self, linspace, WignerGrid};
use qwalk_core::{CoinVector, Distribution};

use crate::args::{self, Command, Format, OutputArgs, SweepArgs, SweepKind, WalkKind};
use crate::CliError;

pub enum Artifact {
    Distribution(Distribution),
    Curve(ReadoutCurve),
    Wigner(WignerGrid),
    Estimate(EstimateDocument),
}

#[derive(Debug, Serialize)]
pub struct EstimateDocument {
    pub protocol: Protocol,
    pub dephasing: f64,
    pub samples: usize,
}

#[derive(Debug, Serialize)]
struct SweepIndex {
    kind: &'static str,
    format: &'static str,
    points: Vec<SweepPoint>,
}

#[derive(Debug, Serialize)]
struct SweepPoint {
    steps: usize,
    dephasing: f64,
    file: String,
}

pub struct Summary {
    command: &'static str,
    steps: Option<usize>,
    dephasing: Option<f64>,
    dest: String,
    note: Option<String>,
    pub to_stdout: bool,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.command)?;
        if let Some(n) = self.steps {
            write!(f, " N={n}")?;
        }
        if let Some(p) = self.dephasing {
            write!(f, " p={}", format_number(p))?;
        }
        if let Some(note) = &self.note {
            write!(f, " {note}")?;
        }
        write!(f, " -> {}", self.dest)
    }
}

pub fn execute(command: &Command) -> Result<Summary, CliError> {
    match command {
        Command::Line(a) | Command::Circle(a) => {
            let on_line = matches!(command, Command::Line(_));
            let n = args::steps(a.walk.steps)?;
            let rate = args::dephasing(a.walk.dephasing)?;
            let default_coin = if on_line {
                CoinVector::symmetric()
            } else {
                CoinVector::DOWN
            };
            let coin = args::coin(a.walk.coin, default_coin)?;
            warn_seed(&a.out);
            let dist = discrete_distribution(on_line, n, coin, rate, a.classical)?;
            let name = if on_line { "line" } else { "circle" };
            finish(
                name,
                Some(n),
                Some(rate.value()),
                Artifact::Distribution(dist),
                &a.out,
            )
        }
        Command::CvLine(a) | Command::CvCircle(a) => {
            let on_line = matches!(command, Command::CvLine(_));
            let n = args::steps(a.walk.steps)?;
            let rate = args::dephasing(a.walk.dephasing)?;
            let default_coin = if on_line {
                CoinVector::symmetric()
            } else {
                CoinVector::DOWN
            };
            let coin = args::coin(a.walk.coin, default_coin)?;
            let params = a.model.params()?;
            let alpha0 = a.model.alpha0()?;
            warn_seed(&a.out);
            let dist = cv_distribution(on_line, n, coin, rate, alpha0, &params)?;
            let name = if on_line { "cv-line" } else { "cv-circle" };
            finish(
                name,
                Some(n),
                Some(rate.value()),
                Artifact::Distribution(dist),
                &a.out,
            )
        }
        Command::Wigner(a) => {
            let n = args::steps(a.walk.steps)?;
            let rate = args::dephasing(a.walk.dephasing)?;
            let on_line = a.walk_kind == WalkKind::Line;
            let coin = args::coin(
                a.walk.coin,
                if on_line {
                    CoinVector::symmetric()
                } else {
                    CoinVector::DOWN
                },
            )?;
            let params = a.model.params()?;
            let alpha0 = a.model.alpha0()?;
            let points = usize::try_from(a.points)
                .ok()
                .filter(|&p| p >= 2)
                .ok_or_else(|| {
                    CliError::range("points", format!("must be at least 2, got {}", a.points))
                })?;
            if !(a.extent > 0.0 && a.extent.is_finite()) {
                return Err(CliError::range(
                    "extent",
                    format!("must be positive, got {}", a.extent),
                ));
            }
            warn_seed(&a.out);
            let rho = if on_line {
                decoherence::evolve_cv_line_density(n, coin, rate, &params, |_, _| Ok(()))?
            } else {
                decoherence::evolve_cv_circle_density(
                    n,
                    alpha0,
                    coin,
                    rate,
                    &params,
                    |_, _| Ok(()),
                )?
            };
            let axis = linspace(-a.extent, a.extent, points);
            let grid = wigner::wigner_function(&wigner::trace_out_coin_density(&rho), &axis, &axis);
            finish(
                "wigner",
                Some(n),
                Some(rate.value()),
                Artifact::Wigner(grid),
                &a.out,
            )
        }
        Command::ReadoutLine(a) | Command::ReadoutCircle(a) => {
            let protocol = if matches!(command, Command::ReadoutLine(_)) {
                Protocol::Line
            } else {
                Protocol::Circle
            };
            if a.conditioned && protocol == Protocol::Line {
                return Err(CliError::usage("--conditioned applies to readout-circle only; the line protocol is always conditioned"));
            }
            let config = ProtocolConfig {
                steps: args::steps(a.walk.steps)?,
                dephasing: args::dephasing(a.walk.dephasing)?,
                tier: a.tier.into(),
                params: a.model.params()?,
                coin0: args::coin(a.walk.coin, CoinVector::DOWN)?,
                alpha0: a.model.alpha0()?,
                conditioned: a.conditioned,
            };
            warn_seed(&a.out);
            let curve = readout::readout_curve(protocol, &config)?;
            let name = if protocol == Protocol::Line {
                "readout-line"
            } else {
                "readout-circle"
            };
            finish(
                name,
                Some(config.steps),
                Some(config.dephasing.value()),
                Artifact::Curve(curve),
                &a.out,
            )
        }
        Command::Estimate(a) => {
            let protocol: Protocol = a.protocol.into();
            if a.conditioned && protocol == Protocol::Line {
                return Err(CliError::usage(
                    "--conditioned applies to the circle protocol only",
                ));
            }
            let observed = read_curve(&a.input)?;
            let config = ProtocolConfig {
                steps: 0,
                dephasing: DephasingRate::NONE,
                tier: a.tier.into(),
                params: a.model.params()?,
                coin0: args::coin(a.coin, CoinVector::DOWN)?,
                alpha0: a.model.alpha0()?,
                conditioned: a.conditioned,
            };
            warn_seed(&a.out);
            let rate = decoherence::estimate_dephasing(&observed, protocol, &config)?;
            let doc = EstimateDocument {
                protocol,
                dephasing: rate.value(),
                samples: observed.len(),
            };
            let mut summary = finish("estimate", None, None, Artifact::Estimate(doc), &a.out)?;
            summary.note = Some(format!("p={}", format_number(rate.value())));
            Ok(summary)
        }
        Command::Sweep(a) => sweep(a),
    }
}

fn warn_seed(out: &OutputArgs) {
    if out.seed.is_some() {
        log::info!("--seed has no effect: all outputs are computed exactly");
    }
}

fn discrete_distribution(
    on_line: bool,
    n: usize,
    coin: CoinVector,
    rate: DephasingRate,
    classical: bool,
) -> Result<Distribution, CliError> {
    Ok(match (on_line, classical) {
        (true, true) => classical_line_distribution(n),
        (false, true) => classical_circle_distribution(n),
        (true, false) if rate.value() == 0.0 => walk::run_line(n, coin)?.distribution(),
        (false, false) if rate.value() == 0.0 => walk::run_ring(n, coin)?.distribution(),
        (true, false) => decoherence::run_line_decohered(n, coin, rate)?,
        (false, false) => decoherence::run_ring_decohered(n, coin, rate)?,
    })
}

fn cv_distribution(
    on_line: bool,
    n: usize,
    coin: CoinVector,
    rate: DephasingRate,
    alpha0: f64,
    params: &ModelParams,
) -> Result<Distribution, CliError> {
    Ok(if on_line {
        if rate.value() == 0.0 {
            cv::position_distribution(&cv::run_cv_line(n, coin, params)?, params)
        } else {
            let rho = decoherence::evolve_cv_line_density(n, coin, rate, params, |_, _| Ok(()))?;
            decoherence::cv_position_distribution(&rho, params)
        }
    } else if rate.value() == 0.0 {
        cv::circle_site_distribution(&cv::run_cv_circle(n, alpha0, coin, params)?, alpha0, params)?
    } else {
        let rho: HybridDensity =
            decoherence::evolve_cv_circle_density(n, alpha0, coin, rate, params, |_, _| Ok(()))?;
        decoherence::cv_circle_site_distribution(&rho, alpha0, params)?
    })
}

fn read_curve(path: &Path) -> Result<ReadoutCurve, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
    let curve = if is_json {
        qio::read_curve_json(file)
    } else {
        qio::read_curve_csv(file)
    };
    curve.map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn write_artifact(
    artifact: &Artifact,
    format: Format,
    out: impl Write,
) -> Result<(), qwalk_core::QwalkError> {
    match (artifact, format) {
        (Artifact::Distribution(d), Format::Csv) => qio::write_distribution_csv(d, out),
        (Artifact::Distribution(d), Format::Json) => {
            qio::write_json(&DistributionDocument::from(d), out)
        }
        (Artifact::Curve(c), Format::Csv) => qio::write_curve_csv(c, out),
        (Artifact::Curve(c), Format::Json) => qio::write_json(c, out),
        (Artifact::Wigner(g), Format::Csv) => qio::write_wigner_csv(g, out),
        (Artifact::Wigner(g), Format::Json) => qio::write_json(g, out),
        (Artifact::Estimate(e), Format::Csv) => {
            let mut out = out;
            writeln!(out, "protocol,dephasing,samples")?;
            let protocol = match e.protocol {
                Protocol::Line => "line",
                Protocol::Circle => "circle",
            };
            writeln!(
                out,
                "{protocol},{},{}",
                format_number(e.dephasing),
                e.samples
            )?;
            out.flush()?;
            Ok(())
        }
        (Artifact::Estimate(e), Format::Json) => qio::write_json(e, out),
    }
}

fn write_to_path(artifact: &Artifact, format: Format, path: &Path) -> Result<(), CliError> {
    let io_err =
        |e: &dyn fmt::Display| CliError::io(format!("cannot write {}: {e}", path.display()));
    let file = File::create(path).map_err(|e| io_err(&e))?;
    write_artifact(artifact, format, BufWriter::new(file)).map_err(|e| io_err(&e))
}

fn finish(
    command: &'static str,
    steps: Option<usize>,
    dephasing: Option<f64>,
    artifact: Artifact,
    out: &OutputArgs,
) -> Result<Summary, CliError> {
    let (dest, to_stdout) = match &out.output {
        Some(path) => {
            write_to_path(&artifact, out.format, path)?;
            (path.display().to_string(), false)
        }
        None => {
            let stdout = io::stdout().lock();
            write_artifact(&artifact, out.format, stdout)
                .map_err(|e| CliError::io(e.to_string()))?;
            ("stdout".to_string(), true)
        }
    };
    Ok(Summary {
        command,
        steps,
        dephasing,
        dest,
        note: None,
        to_stdout,
    })
}

fn sweep_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("QWALK_THREADS") {
        let threads: usize =
            raw.trim()
                .parse()
                .ok()
                .filter(|&t| t > 0)
                .ok_or_else(|| CliError {
                    code: 3,
                    message: format!("QWALK_THREADS must be a positive integer, got `{raw}`"),
                })?;
        builder = builder.num_threads(threads);
    }
    builder.build().map_err(|e| CliError {
        code: 1,
        message: e.to_string(),
    })
}

fn sweep(a: &SweepArgs) -> Result<Summary, CliError> {
    let steps: Vec<usize> = a
        .steps
        .iter()
        .map(|&n| args::steps(n))
        .collect::<Result<_, _>>()?;
    let rates: Vec<DephasingRate> = a
        .dephasing
        .iter()
        .map(|&p| args::dephasing(p))
        .collect::<Result<_, _>>()?;
    if rates.is_empty() {
        return Err(CliError::usage("--dephasing needs at least one value"));
    }
    let on_line = matches!(
        a.kind,
        SweepKind::Line | SweepKind::CvLine | SweepKind::ReadoutLine
    );
    let default_coin = match a.kind {
        SweepKind::Line | SweepKind::CvLine => CoinVector::symmetric(),
        _ => CoinVector::DOWN,
    };
    let coin = args::coin(a.coin, default_coin)?;
    let params = a.model.params()?;
    let alpha0 = a.model.alpha0()?;
    fs::create_dir_all(&a.output)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", a.output.display())))?;

    let grid: Vec<(usize, DephasingRate)> = steps
        .iter()
        .flat_map(|&n| rates.iter().map(move |&p| (n, p)))
        .collect();
    let kind = a.kind;
    let compute = |n: usize, rate: DephasingRate| -> Result<Artifact, CliError> {
        Ok(match kind {
            SweepKind::Line | SweepKind::Circle => {
                Artifact::Distribution(discrete_distribution(on_line, n, coin, rate, a.classical)?)
            }
            SweepKind::CvLine | SweepKind::CvCircle => {
                Artifact::Distribution(cv_distribution(on_line, n, coin, rate, alpha0, &params)?)
            }
            SweepKind::ReadoutLine | SweepKind::ReadoutCircle => {
                let config = ProtocolConfig {
                    steps: n,
                    dephasing: rate,
                    tier: Tier::from(a.tier),
                    params,
                    coin0: coin,
                    alpha0,
                    conditioned: false,
                };
                let protocol = if on_line {
                    Protocol::Line
                } else {
                    Protocol::Circle
                };
                Artifact::Curve(readout::readout_curve(protocol, &config)?)
            }
        })
    };

    let pool = sweep_pool()?;
    let points: Vec<SweepPoint> = pool.install(|| {
        grid.par_iter()
            .map(|&(n, rate)| {
                let file = format!(
                    "{}_N{n}_p{}.{}",
                    kind.name(),
                    format_number(rate.value()),
                    a.format.extension()
                );
                let artifact = compute(n, rate)?;
                write_to_path(&artifact, a.format, &a.output.join(&file))?;
                Ok(SweepPoint {
                    steps: n,
                    dephasing: rate.value(),
                    file,
                })
            })
            .collect::<Result<_, CliError>>()
    })?;

    let index_path: PathBuf = a.output.join("index.json");
    let index = SweepIndex {
        kind: kind.name(),
        format: a.format.extension(),
        points,
    };
    let file = File::create(&index_path)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", index_path.display())))?;
    qio::write_json(&index, BufWriter::new(file)).map_err(|e| CliError::io(e.to_string()))?;

    Ok(Summary {
        command: "sweep",
        steps: None,
        dephasing: None,
        dest: index_path.display().to_string(),
        note: Some(format!("{} {} points", index.points.len(), kind.name())),
        to_stdout: false,
    })
}
