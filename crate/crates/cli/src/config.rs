//! Run configuration: a JSON document describing the torus, the bundle, the flux and
//! command parameters. Every validation error names the offending field by JSON pointer.

use nalgebra::DMatrix;
use serde_json::{Map, Value};
use twisted_flux::exterior::FlatMetric;
use twisted_flux::{Complex64, FlatBundle, FluxForm, MultiIndex, TwistedTorus};

use crate::CliError;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub torus: TwistedTorus<f64>,
    pub truncation: usize,
    pub params: Params,
}

/// Command-specific parameters under `/params`.
#[derive(Clone, Debug, Default)]
pub struct Params(Map<String, Value>);

fn invalid(pointer: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::config(pointer.into(), message.into())
}

fn as_f64(v: &Value, pointer: &str) -> Result<f64, CliError> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| invalid(pointer, "expected a finite number"))
}

fn as_usize(v: &Value, pointer: &str) -> Result<usize, CliError> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| invalid(pointer, "expected a nonnegative integer"))
}

fn as_array<'a>(v: &'a Value, pointer: &str) -> Result<&'a Vec<Value>, CliError> {
    v.as_array().ok_or_else(|| invalid(pointer, "expected an array"))
}

fn field<'a>(obj: &'a Value, key: &str, pointer: &str) -> Result<&'a Value, CliError> {
    obj.get(key).ok_or_else(|| invalid(format!("{pointer}/{key}"), "missing field"))
}

fn f64_list(v: &Value, pointer: &str) -> Result<Vec<f64>, CliError> {
    as_array(v, pointer)?.iter().enumerate().map(|(i, x)| as_f64(x, &format!("{pointer}/{i}"))).collect()
}

fn complex(v: &Value, pointer: &str) -> Result<Complex64, CliError> {
    let parts = f64_list(v, pointer)?;
    match parts.as_slice() {
        [re, im] => Ok(Complex64::new(*re, *im)),
        _ => Err(invalid(pointer, "expected [re, im]")),
    }
}

impl Params {
    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        self.0.get(key).map_or(Ok(default), |v| as_f64(v, &format!("/params/{key}")))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        self.0.get(key).map_or(Ok(default), |v| as_usize(v, &format!("/params/{key}")))
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str, CliError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v.as_str().ok_or_else(|| invalid(format!("/params/{key}"), "expected a string")),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.0.get(key).map(|v| f64_list(v, &format!("/params/{key}"))).transpose()
    }

    pub fn complex_or(&self, key: &str, default: Complex64) -> Result<Complex64, CliError> {
        self.0.get(key).map_or(Ok(default), |v| complex(v, &format!("/params/{key}")))
    }

    /// Wraps a parse failure of a string-valued parameter.
    pub fn bad(&self, key: &str, message: impl Into<String>) -> CliError {
        invalid(format!("/params/{key}"), message)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let root: Value = serde_json::from_str(text).map_err(|e| invalid("", format!("not valid JSON: {e}")))?;
        if !root.is_object() {
            return Err(invalid("", "expected an object"));
        }
        let manifold = field(&root, "manifold", "")?;
        let n = as_usize(field(manifold, "dim", "/manifold")?, "/manifold/dim")?;
        if n == 0 || n > twisted_flux::exterior::MAX_DIM {
            return Err(invalid("/manifold/dim", format!("dimension must lie in 1..={}", twisted_flux::exterior::MAX_DIM)));
        }
        let entries = f64_list(field(manifold, "metric", "/manifold")?, "/manifold/metric")?;
        if entries.len() != n * n {
            return Err(invalid("/manifold/metric", format!("expected {} entries", n * n)));
        }
        let metric = FlatMetric::new(DMatrix::from_row_slice(n, n, &entries)).map_err(|e| invalid("/manifold/metric", e.to_string()))?;
        let bundle = match root.get("bundle") {
            None => FlatBundle::trivial(n, 1),
            Some(b) => parse_bundle(b, n)?,
        };
        let flux = match root.get("flux") {
            None => FluxForm::zero(n),
            Some(f) => parse_flux(f, n)?,
        };
        let truncation = match root.get("truncation") {
            None => 2,
            Some(v) => as_usize(v, "/truncation")?,
        };
        let params = match root.get("params") {
            None => Params::default(),
            Some(Value::Object(m)) => Params(m.clone()),
            Some(_) => return Err(invalid("/params", "expected an object")),
        };
        let torus = TwistedTorus::new(metric, bundle, flux).map_err(|e| invalid("/flux", e.to_string()))?;
        Ok(RunConfig { torus, truncation, params })
    }
}

fn parse_bundle(b: &Value, n: usize) -> Result<FlatBundle<f64>, CliError> {
    let rank = as_usize(field(b, "rank", "/bundle")?, "/bundle/rank")?;
    if rank == 0 {
        return Err(invalid("/bundle/rank", "rank must be positive"));
    }
    if let Some(h) = b.get("holonomy") {
        let rows = as_array(h, "/bundle/holonomy")?;
        if rows.len() != rank {
            return Err(invalid("/bundle/holonomy", format!("expected {rank} rows of angles")));
        }
        let mut angles = Vec::with_capacity(rank);
        for (a, row) in rows.iter().enumerate() {
            let p = format!("/bundle/holonomy/{a}");
            let row = f64_list(row, &p)?;
            if row.len() != n {
                return Err(invalid(p, format!("expected {n} angles")));
            }
            angles.push(row);
        }
        return FlatBundle::from_angles(n, angles).map_err(|e| invalid("/bundle/holonomy", e.to_string()));
    }
    if let Some(u) = b.get("unitaries") {
        let mats = as_array(u, "/bundle/unitaries")?;
        if mats.len() != n {
            return Err(invalid("/bundle/unitaries", format!("expected one matrix per generator ({n})")));
        }
        let mut out = Vec::with_capacity(n);
        for (g, m) in mats.iter().enumerate() {
            let p = format!("/bundle/unitaries/{g}");
            let rows = as_array(m, &p)?;
            if rows.len() != rank {
                return Err(invalid(p, format!("expected {rank} rows")));
            }
            let mut mat = DMatrix::zeros(rank, rank);
            for (i, row) in rows.iter().enumerate() {
                let rp = format!("{p}/{i}");
                let cols = as_array(row, &rp)?;
                if cols.len() != rank {
                    return Err(invalid(rp, format!("expected {rank} entries")));
                }
                for (j, c) in cols.iter().enumerate() {
                    mat[(i, j)] = complex(c, &format!("{rp}/{j}"))?;
                }
            }
            out.push(mat);
        }
        return FlatBundle::from_unitaries(&out).map_err(|e| invalid("/bundle/unitaries", e.to_string()));
    }
    Ok(FlatBundle::trivial(n, rank))
}

fn parse_flux(f: &Value, n: usize) -> Result<FluxForm<f64>, CliError> {
    let comps = as_array(field(f, "components", "/flux")?, "/flux/components")?;
    let mut terms = Vec::new();
    for (c, comp) in comps.iter().enumerate() {
        let cp = format!("/flux/components/{c}");
        let degree = as_usize(field(comp, "degree", &cp)?, &format!("{cp}/degree"))?;
        if degree < 3 || degree % 2 == 0 || degree > n {
            return Err(invalid(format!("{cp}/degree"), "flux degrees must be odd, at least 3 and at most the dimension"));
        }
        for (t, term) in as_array(field(comp, "terms", &cp)?, &format!("{cp}/terms"))?.iter().enumerate() {
            let tp = format!("{cp}/terms/{t}");
            let axes: Vec<usize> = as_array(field(term, "multi_index", &tp)?, &format!("{tp}/multi_index"))?
                .iter()
                .enumerate()
                .map(|(i, a)| as_usize(a, &format!("{tp}/multi_index/{i}")))
                .collect::<Result<_, _>>()?;
            let index = MultiIndex::new(&axes)
                .ok()
                .filter(|i| i.degree() == degree && i.fits(n))
                .ok_or_else(|| invalid(format!("{tp}/multi_index"), format!("expected {degree} increasing axes below {n}")))?;
            let mode = match term.get("mode") {
                None => vec![0; n],
                Some(m) => {
                    let mp = format!("{tp}/mode");
                    let k: Vec<i32> = as_array(m, &mp)?
                        .iter()
                        .enumerate()
                        .map(|(i, x)| x.as_i64().map(|v| v as i32).ok_or_else(|| invalid(format!("{mp}/{i}"), "expected an integer")))
                        .collect::<Result<_, _>>()?;
                    if k.len() != n {
                        return Err(invalid(mp, format!("expected {n} entries")));
                    }
                    k
                }
            };
            let re = as_f64(field(term, "re", &tp)?, &format!("{tp}/re"))?;
            let im = as_f64(field(term, "im", &tp)?, &format!("{tp}/im"))?;
            terms.push((mode, index, Complex64::new(re, im)));
        }
    }
    FluxForm::new(n, terms).map_err(|e| invalid("/flux/components", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flux_config() {
        let text = r#"{"manifold": {"dim": 3, "metric": [1,0,0, 0,1,0, 0,0,1]},
            "flux": {"components": [{"degree": 3, "terms": [{"multi_index": [0,1,2], "re": 0.5, "im": 0}]}]},
            "truncation": 3}"#;
        let c = RunConfig::from_json(text).unwrap();
        assert_eq!(c.truncation, 3);
        assert_eq!(c.torus.flux().integral(), Complex64::new(0.5, 0.0));
    }

    #[test]
    fn pointers_name_the_field() {
        let bad_metric = r#"{"manifold": {"dim": 2, "metric": [1, 2, 2, 1]}}"#;
        assert_eq!(RunConfig::from_json(bad_metric).unwrap_err().pointer.as_deref(), Some("/manifold/metric"));
        let bad_degree = r#"{"manifold": {"dim": 3, "metric": [1,0,0,0,1,0,0,0,1]},
            "flux": {"components": [{"degree": 2, "terms": []}]}}"#;
        assert_eq!(RunConfig::from_json(bad_degree).unwrap_err().pointer.as_deref(), Some("/flux/components/0/degree"));
        let bad_angles = r#"{"manifold": {"dim": 2, "metric": [1,0,0,1]}, "bundle": {"rank": 1, "holonomy": [[0.1]]}}"#;
        assert_eq!(RunConfig::from_json(bad_angles).unwrap_err().pointer.as_deref(), Some("/bundle/holonomy/0"));
    }
}
