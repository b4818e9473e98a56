use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use formation_core::sim::metrics::{events_jsonl, heatmap_csv, mean, percentile, travel_times_csv};
use formation_core::sim::{parse_scenario, run_simulation, write_scenario, Method, Scenario};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    scenario_path: String,
    method: &'a str,
    volume: f64,
    seed: u64,
    seeds: &'a [u64],
    output_dir: String,
    tool_version: &'a str,
    config_hash: String,
    status: &'a str,
}

struct Row {
    method: Method,
    volume: f64,
    seed: Option<u64>,
    status: String,
    generated: usize,
    travel: Vec<f64>,
}

pub fn run(
    scenario: &Path,
    methods: &[String],
    volumes: &[f64],
    seeds: &[u64],
    out: &Path,
) -> Result<ExitCode, String> {
    if volumes.is_empty() || seeds.is_empty() {
        return Err("need at least one volume and one seed".into());
    }
    let methods = methods
        .iter()
        .map(|m| Method::parse(m).ok_or_else(|| format!("unknown method '{m}'")))
        .collect::<Result<Vec<_>, _>>()?;
    let text = fs::read_to_string(scenario).map_err(|e| format!("{}: {e}", scenario.display()))?;
    let base = parse_scenario(&text).map_err(|e| format!("{}: {e}", scenario.display()))?;
    fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;

    let mut rows = Vec::new();
    let mut failed = 0;
    for &method in &methods {
        for &volume in volumes {
            let mut pooled = Vec::new();
            let mut all_ok = true;
            let mut generated = 0;
            for &seed in seeds {
                let s = Scenario {
                    method,
                    volume,
                    seed,
                    ..base.clone()
                };
                let dir = out.join(format!("{}_v{volume}_s{seed}", method.short_name()));
                let row = one_run(&s, scenario, seeds, &dir)?;
                if row.status != "ok" {
                    eprintln!("{}: {}", dir.display(), row.status);
                    failed += 1;
                    all_ok = false;
                }
                pooled.extend_from_slice(&row.travel);
                generated += row.generated;
                rows.push(row);
            }
            rows.push(Row {
                method,
                volume,
                seed: None,
                status: if all_ok { "ok" } else { "partial" }.into(),
                generated,
                travel: pooled,
            });
        }
    }
    write_atomic(&out.join("summary.csv"), &summary_csv(&rows))?;
    println!(
        "{} runs written to {}",
        rows.iter().filter(|r| r.seed.is_some()).count(),
        out.display()
    );
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{failed} run(s) aborted");
        ExitCode::FAILURE
    })
}

fn one_run(s: &Scenario, scenario_path: &Path, seeds: &[u64], dir: &Path) -> Result<Row, String> {
    let canonical = write_scenario(s);
    let hash = format!("{:x}", Sha256::digest(canonical.as_bytes()));
    let tmp = dir.with_extension("partial");
    let _ = fs::remove_dir_all(&tmp);
    fs::create_dir_all(&tmp).map_err(|e| format!("{}: {e}", tmp.display()))?;
    let io =
        |p: PathBuf, body: &str| fs::write(&p, body).map_err(|e| format!("{}: {e}", p.display()));

    let outcome = run_simulation(s);
    let (status, generated, travel) = match &outcome {
        Ok(r) => {
            io(
                tmp.join("travel_times.csv"),
                &travel_times_csv(&r.metrics.travel_times, s.method),
            )?;
            io(tmp.join("heatmap.csv"), &heatmap_csv(&r.metrics.heatmap))?;
            io(tmp.join("events.jsonl"), &events_jsonl(&r.log.events))?;
            let status = if r.collision_count == 0 {
                "ok".to_string()
            } else {
                format!("collisions: {}", r.collision_count)
            };
            (
                status,
                r.generated(),
                r.metrics.travel_times.iter().map(|t| t.travel).collect(),
            )
        }
        Err(e) => (format!("aborted: {e}"), 0, Vec::new()),
    };
    io(tmp.join("scenario.txt"), &canonical)?;
    let manifest = RunManifest {
        command: "sim",
        scenario_path: scenario_path.display().to_string(),
        method: s.method.short_name(),
        volume: s.volume,
        seed: s.seed,
        seeds,
        output_dir: dir.display().to_string(),
        tool_version: env!("CARGO_PKG_VERSION"),
        config_hash: hash,
        status: &status,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())?;
    io(tmp.join("manifest.json"), &(json + "\n"))?;
    let _ = fs::remove_dir_all(dir);
    fs::rename(&tmp, dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    Ok(Row {
        method: s.method,
        volume: s.volume,
        seed: Some(s.seed),
        status,
        generated,
        travel,
    })
}

fn summary_csv(rows: &[Row]) -> String {
    let mut out = String::from(
        "method,volume_veh_per_lane_h,seed,status,generated,exited,mean_s,median_s,p95_s\n",
    );
    let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.3}"));
    for r in rows {
        let seed = r.seed.map_or("all".to_string(), |s| s.to_string());
        out.push_str(&format!(
            "{},{},{seed},{},{},{},{},{},{}\n",
            r.method.short_name(),
            r.volume,
            r.status,
            r.generated,
            r.travel.len(),
            fmt(mean(r.travel.iter().copied())),
            fmt(percentile(&r.travel, 0.5)),
            fmt(percentile(&r.travel, 0.95)),
        ));
    }
    out
}

fn write_atomic(path: &Path, body: &str) -> Result<(), String> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, body).map_err(|e| format!("{}: {e}", tmp.display()))?;
    fs::rename(&tmp, path).map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_keeps_aborted_runs() {
        let rows = [
            Row {
                method: Method::FormationControl,
                volume: 1600.0,
                seed: Some(1),
                status: "aborted: planning failed".into(),
                generated: 0,
                travel: vec![],
            },
            Row {
                method: Method::FormationControl,
                volume: 1600.0,
                seed: Some(2),
                status: "ok".into(),
                generated: 3,
                travel: vec![60.0, 70.0, 80.0],
            },
        ];
        let csv = summary_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "fc,1600,1,aborted: planning failed,0,0,,,");
        assert_eq!(lines[2], "fc,1600,2,ok,3,3,70.000,70.000,80.000");
    }
}
