use serde_json::{json, Value};
use twisted_flux::cylinder::{
    aps_cylinder_index, boundary_identification_check, cylinder_signature_identity, interval_cohomology, BoundaryCondition,
    CylinderProblem, ZeroModeConvention,
};
use twisted_flux::heat::{alpha0_extract, default_t_grid, heat_trace_eigen, heat_trace_images, supertrace, Grading, HeatTrace};
use twisted_flux::signature::{harmonic_splitting, hermitian_form, index_split_check};
use twisted_flux::spectral::{eta_invariant, rho_invariant, spectral_flow, EtaMethod, OddSignatureOperator};
use twisted_flux::{Complex64, Parity};

use crate::config::RunConfig;
use crate::output::to_value;
use crate::{core, CliError, Output};

pub fn dispatch(command: &str, cfg: &RunConfig) -> Result<Output, CliError> {
    let json = match command {
        "betti" => betti(cfg)?,
        "signature" => signature(cfg)?,
        "eta" => eta(cfg)?,
        "rho" => rho(cfg)?,
        "spectral-flow" => flow(cfg)?,
        "aps-index" => aps(cfg)?,
        "interval-cohomology" => interval(cfg)?,
        "heat-trace" => return heat(cfg).map(Output::Csv),
        "alpha0" => alpha0(cfg)?,
        other => return Err(CliError::config("".into(), format!("unknown command {other}"))),
    };
    Ok(Output::Json(json))
}

fn betti(cfg: &RunConfig) -> Result<Value, CliError> {
    let c = cfg.torus.cohomology(cfg.truncation).map_err(core("twisted_complex", "twisted_cohomology"))?;
    Ok(to_value(&c))
}

fn signature(cfg: &RunConfig) -> Result<Value, CliError> {
    let lambda = cfg.params.complex_or("lambda", Complex64::new(1.0, 0.0))?;
    let k = cfg.truncation;
    let form = hermitian_form(&cfg.torus, lambda, k).map_err(core("signature", "hermitian_form"))?;
    let split = harmonic_splitting(&cfg.torus, k).map_err(core("signature", "harmonic_splitting"))?;
    let index = index_split_check(&cfg.torus, k).map_err(core("signature", "index_split"))?;
    Ok(json!({
        "hermitian_form": to_value(&form),
        "harmonic_splitting": to_value(&split),
        "index_split": to_value(&index),
        "agree": form.signature == split.signature,
    }))
}

fn method(cfg: &RunConfig) -> Result<EtaMethod, CliError> {
    let name = cfg.params.str_or("method", EtaMethod::ModeSymmetry.name())?;
    EtaMethod::parse(name).map_err(|e| cfg.params.bad("method", e.to_string()))
}

fn eta(cfg: &RunConfig) -> Result<Value, CliError> {
    let op = OddSignatureOperator::new(&cfg.torus).map_err(core("spectral", "odd_signature_operator"))?;
    let est = eta_invariant(&op, cfg.truncation, method(cfg)?).map_err(core("spectral", "eta_invariant"))?;
    Ok(to_value(&est))
}

fn rho(cfg: &RunConfig) -> Result<Value, CliError> {
    let est = rho_invariant(&cfg.torus, cfg.truncation, method(cfg)?).map_err(core("spectral", "rho_invariant"))?;
    Ok(to_value(&est))
}

fn flow(cfg: &RunConfig) -> Result<Value, CliError> {
    let steps = cfg.params.usize_or("steps", 64)?;
    let r = spectral_flow(&cfg.torus, cfg.truncation, steps).map_err(core("spectral", "spectral_flow"))?;
    Ok(to_value(&r))
}

fn problem(cfg: &RunConfig) -> Result<CylinderProblem, CliError> {
    let length = cfg.params.f64_or("length", 1.0)?;
    let convention = match cfg.params.str_or("convention", "nonnegative")? {
        "nonnegative" => ZeroModeConvention::NonNegative,
        "strictly-positive" => ZeroModeConvention::StrictlyPositive,
        other => return Err(cfg.params.bad("convention", format!("unknown convention {other}"))),
    };
    Ok(CylinderProblem::new(cfg.torus.clone(), length, cfg.truncation)
        .map_err(core("cylinder_aps", "cylinder_problem"))?
        .with_convention(convention))
}

fn aps(cfg: &RunConfig) -> Result<Value, CliError> {
    let p = problem(cfg)?;
    let ident = boundary_identification_check(&cfg.torus, cfg.truncation).map_err(core("cylinder_aps", "boundary_identification_check"))?;
    let r = aps_cylinder_index(&p).map_err(core("cylinder_aps", "aps_cylinder_index"))?;
    cylinder_signature_identity(&p).map_err(core("cylinder_aps", "cylinder_signature_identity"))?;
    let mut v = to_value(&r);
    v["length"] = json!(p.length);
    v["boundary_identification"] = to_value(&ident);
    Ok(v)
}

fn interval(cfg: &RunConfig) -> Result<Value, CliError> {
    let condition = match cfg.params.str_or("condition", "absolute")? {
        "absolute" => BoundaryCondition::Absolute,
        "relative" => BoundaryCondition::Relative,
        other => return Err(cfg.params.bad("condition", format!("unknown condition {other}"))),
    };
    let r = interval_cohomology(&problem(cfg)?, condition).map_err(core("cylinder_aps", "interval_cohomology"))?;
    Ok(to_value(&r))
}

fn grid(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    Ok(cfg.params.f64_list("t_grid")?.unwrap_or_else(default_t_grid))
}

fn parity(cfg: &RunConfig) -> Result<Parity, CliError> {
    match cfg.params.str_or("parity", "all")? {
        "all" => Ok(Parity::All),
        "even" => Ok(Parity::Even),
        "odd" => Ok(Parity::Odd),
        other => Err(cfg.params.bad("parity", format!("unknown parity {other}"))),
    }
}

pub fn heat_csv(trace: &HeatTrace) -> String {
    let method = match trace.method {
        twisted_flux::heat::HeatMethod::Eigen => "eigen",
        twisted_flux::heat::HeatMethod::Images => "images",
    };
    let mut out = String::from("t,value,method,tail_bound\n");
    for i in 0..trace.t.len() {
        out.push_str(&format!("{:.16e},{:.16e},{method},{:.16e}\n", trace.t[i], trace.values[i], trace.tail_bounds[i]));
    }
    out
}

fn heat(cfg: &RunConfig) -> Result<String, CliError> {
    let t = grid(cfg)?;
    let parity = parity(cfg)?;
    let trace = match cfg.params.str_or("method", "eigen")? {
        "eigen" => heat_trace_eigen(&cfg.torus, parity, &t, cfg.truncation).map_err(core("heat_kernel", "heat_trace_eigen"))?,
        "images" => heat_trace_images(&cfg.torus, parity, &t).map_err(core("heat_kernel", "heat_trace_images"))?,
        other => return Err(cfg.params.bad("method", format!("unknown method {other}"))),
    };
    Ok(heat_csv(&trace))
}

fn alpha0(cfg: &RunConfig) -> Result<Value, CliError> {
    let t = grid(cfg)?;
    let n = cfg.torus.dim();
    let default = if n % 2 == 0 { "signature" } else { "parity" };
    let grading = match cfg.params.str_or("grading", default)? {
        "signature" => Grading::Signature,
        "parity" => Grading::Parity,
        other => return Err(cfg.params.bad("grading", format!("unknown grading {other}"))),
    };
    let values = supertrace(&cfg.torus, grading, &t, cfg.truncation).map_err(core("heat_kernel", "supertrace"))?;
    let fit = alpha0_extract(&t, &values, n).map_err(core("heat_kernel", "alpha0_extract"))?;
    Ok(json!({
        "grading": to_value(&grading),
        "rank": cfg.torus.bundle().rank(),
        "t": t,
        "supertrace": values,
        "fit": to_value(&fit),
    }))
}
