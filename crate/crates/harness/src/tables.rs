//! Flat CSV tables and gnuplot scripts from the reports listed in a manifest.

use std::path::{Path, PathBuf};

use log::warn;
use serde_json::Value;

use crate::error::HarnessError;
use crate::manifest::RunManifest;

pub const TABLE_DIR: &str = "tables";

/// A CSV cell: numbers in shortest round-trip form, `null` as empty.
fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(HarnessError::runtime)?;
    for r in rows {
        w.write_record(r).map_err(HarnessError::runtime)?;
    }
    w.into_inner().map_err(HarnessError::runtime)
}

fn arr(v: &Value) -> &[Value] {
    v.as_array().map_or(&[], Vec::as_slice)
}

struct Table {
    name: String,
    bytes: Vec<u8>,
}

fn table(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<Table, HarnessError> {
    Ok(Table { name: format!("{name}.csv"), bytes: csv_bytes(header, &rows)? })
}

fn script(name: &str, body: &str) -> Table {
    Table { name: format!("{name}.gp"), bytes: body.as_bytes().to_vec() }
}

fn fields(v: &Value, keys: &[&str]) -> Vec<String> {
    keys.iter().map(|k| cell(&v[*k])).collect()
}

fn mdp(r: &Value) -> Result<Vec<Table>, HarnessError> {
    let rows = arr(&r["rows"])
        .iter()
        .map(|row| {
            let p = &row["probability"];
            let neg = row["min_rate"].as_f64().map_or(String::new(), |x| Value::from(-x).to_string());
            vec![
                cell(&row["epsilon"]),
                cell(&row["radius"]),
                cell(&p["estimate"]),
                cell(&p["lo"]),
                cell(&p["hi"]),
                cell(&row["scaled_log"]),
                neg,
                cell(&row["one_sided"]),
            ]
        })
        .collect();
    Ok(vec![
        table(
            "mdp_scaling",
            &["epsilon", "radius", "p_hat", "lo", "hi", "scaled_log_p", "neg_min_rate", "one_sided"],
            rows,
        )?,
        script(
            "mdp_scaling",
            "set datafile separator ','\nset logscale x\nset key autotitle columnhead\nset xlabel 'epsilon'\n\
             plot 'mdp_scaling.csv' using 1:6 with linespoints title 'a^2 log P', \\\n     '' using 1:7 with lines title '-I*'\n",
        ),
    ])
}

fn fw(r: &Value) -> Result<Vec<Table>, HarnessError> {
    let rows = arr(&r["rows"])
        .iter()
        .map(|row| {
            let j = &row["joint"];
            vec![
                cell(&row["epsilon"]),
                cell(&row["loglog"]),
                cell(&j["estimate"]),
                cell(&j["lo"]),
                cell(&j["hi"]),
                cell(&j["zero_hit_bound"]),
                cell(&row["bound"]),
                cell(&row["below_bound"]),
                cell(&row["noise_close"]["estimate"]),
                cell(&row["deviation"]["estimate"]),
                cell(&row["increment"]["estimate"]),
            ]
        })
        .collect();
    Ok(vec![table(
        "fw_probe",
        &["epsilon", "loglog", "joint", "lo", "hi", "zero_hit_bound", "bound", "below_bound", "noise_close", "deviation", "increment"],
        rows,
    )?])
}

fn moments(r: &Value) -> Result<Vec<Table>, HarnessError> {
    let rows = arr(&r["rows"])
        .iter()
        .map(|row| fields(row, &["quantity", "p", "epsilon", "mean", "std_error", "admissible", "threshold"]))
        .collect();
    let fits = arr(&r["fits"])
        .iter()
        .map(|f| {
            let fit = &f["fit"];
            vec![
                cell(&f["quantity"]),
                cell(&f["p"]),
                cell(&f["stated_exponent"]),
                cell(&fit["exponent"]),
                cell(&fit["exponent_std_error"]),
                cell(&f["implied_constant"]),
            ]
        })
        .collect();
    Ok(vec![
        table("moments", &["quantity", "p", "epsilon", "mean", "std_error", "admissible", "threshold"], rows)?,
        table("moment_fits", &["quantity", "p", "stated_exponent", "fitted_exponent", "exponent_std_error", "implied_constant"], fits)?,
    ])
}

fn strassen(r: &Value) -> Result<Vec<Table>, HarnessError> {
    let rep = &r["report"];
    let eps = arr(&rep["epsilons"]);
    let mut rows = Vec::new();
    for (i, (d, n)) in arr(&rep["distances"]).iter().zip(arr(&rep["nearest"])).enumerate() {
        for (k, e) in eps.iter().enumerate() {
            rows.push(vec![i.to_string(), k.to_string(), cell(e), cell(&d[k]), cell(&n[k]), cell(&rep["running_max"][i][k])]);
        }
    }
    let hits = arr(&rep["hit_fraction"])
        .iter()
        .enumerate()
        .map(|(i, f)| vec![i.to_string(), cell(&r["probe_labels"][i]), cell(f)])
        .collect();
    Ok(vec![
        table("strassen_distances", &["replicate", "step", "epsilon", "distance", "nearest", "running_max"], rows)?,
        table("strassen_hits", &["candidate", "label", "hit_fraction"], hits)?,
    ])
}

fn classical(r: &Value) -> Result<Vec<Table>, HarnessError> {
    let ratio = &r["ratio"];
    let levels: Vec<String> = arr(&ratio["rows"])
        .first()
        .map(|row| arr(&row["quantiles"]).iter().map(|q| format!("q{}", cell(&q[0]))).collect())
        .unwrap_or_default();
    let rows = arr(&ratio["rows"])
        .iter()
        .map(|row| {
            let mut c = fields(row, &["j", "epsilon", "mean", "std_error", "min", "max"]);
            c.extend(arr(&row["quantiles"]).iter().map(|q| cell(&q[1])));
            c
        })
        .collect();
    let mut header = vec!["j", "epsilon", "mean", "std_error", "min", "max"];
    header.extend(levels.iter().map(String::as_str));
    let mut out = vec![
        table("ratio", &header, rows)?,
        script(
            "ratio",
            "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'j'\n\
             plot 'ratio.csv' using 1:3:4 with yerrorbars title 'mean ratio', '' using 1:5 with lines, '' using 1:6 with lines\n",
        ),
    ];
    let c = &r["compactness"];
    if !c.is_null() {
        let pairs = arr(&c["pairs"]).iter().map(|p| fields(p, &["eps_small", "eps_large", "mean_distance", "std_error"])).collect();
        let tails = arr(&c["tails"])
            .iter()
            .map(|t| {
                let p = &t["probability"];
                vec![cell(&t["horizon"]), cell(&t["epsilon"]), cell(&p["estimate"]), cell(&p["lo"]), cell(&p["hi"])]
            })
            .collect();
        out.push(table("compactness_pairs", &["eps_small", "eps_large", "mean_distance", "std_error"], pairs)?);
        out.push(table("compactness_tails", &["horizon", "epsilon", "probability", "lo", "hi"], tails)?);
    }
    Ok(out)
}

fn tables_for(experiment: &str, result: &Value) -> Result<Vec<Table>, HarnessError> {
    match experiment {
        "simulate" => Ok(vec![table(
            "simulate_samples",
            &["index", "records", "sup_h_sq", "int_v_sq", "energy_norm", "terminal_h_sq", "max_relative_divergence"],
            arr(&result["samples"])
                .iter()
                .map(|s| {
                    fields(s, &["index", "records", "sup_h_sq", "int_v_sq", "energy_norm", "terminal_h_sq", "max_relative_divergence"])
                })
                .collect(),
        )?]),
        "skeleton" => Ok(vec![table(
            "skeleton_series",
            &["t", "h_sq", "v_sq"],
            arr(&result["series"]).iter().map(|p| fields(p, &["t", "h_sq", "v_sq"])).collect(),
        )?]),
        "rate" => Ok(vec![table(
            "rate_history",
            &["mu", "residual", "energy"],
            arr(&result["diagnostics"]["history"]).iter().map(|h| arr(h).iter().map(cell).collect()).collect(),
        )?]),
        "mdp-scaling" => mdp(result),
        "fw-probe" => fw(result),
        "moments" => moments(result),
        "lil-strassen" => strassen(result),
        "lil-classical" => classical(result),
        "verify" => Ok(vec![table(
            "verify",
            &["name", "passed", "measured", "threshold", "detail"],
            arr(&result["items"]).iter().map(|i| fields(i, &["name", "passed", "measured", "threshold", "detail"])).collect(),
        )?]),
        other => Err(HarnessError::Runtime(format!("no tables for experiment {other}"))),
    }
}

/// Writes tables next to the manifest under `tables/`. An inventory without
/// reports writes nothing and only warns. Output depends only on the report
/// contents, so re-emission is byte-identical.
pub fn emit_tables(manifest_path: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let manifest = RunManifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let reports: Vec<_> = manifest.files.iter().filter(|f| f.role == "report").collect();
    if reports.is_empty() {
        warn!("manifest {} lists no reports; nothing to emit", manifest_path.display());
        return Ok(Vec::new());
    }
    let mut written = Vec::new();
    for entry in reports {
        let path = dir.join(&entry.path);
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        let report: Value = serde_json::from_str(&text).map_err(|e| HarnessError::io(&path, e))?;
        let experiment = report["experiment"].as_str().unwrap_or_default().to_string();
        let out_dir = dir.join(TABLE_DIR);
        std::fs::create_dir_all(&out_dir).map_err(|e| HarnessError::io(&out_dir, e))?;
        for t in tables_for(&experiment, &report["result"])? {
            let p = out_dir.join(&t.name);
            std::fs::write(&p, &t.bytes).map_err(|e| HarnessError::io(&p, e))?;
            written.push(p);
        }
    }
    Ok(written)
}
