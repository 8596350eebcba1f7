//! Output directories: masks, CSV tables, audit JSON, plots and a manifest
//! with the SHA-256 of every file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::svg::{mask_overlay_svg, profile_svg};
use super::{GridRun, InitialSpec, ProfileRun, RunKind, ScenarioConfig};
use crate::energy::write_energy_csv;
use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::geometry::{volume, write_mask, BinaryField};
use crate::grid_solver::{write_telemetry_csv, StepOutcome};
use crate::profile::{CurvatureReport, ProfileSolution};
use crate::verify::AuditReport;

pub const MANIFEST_FORMAT: &str = "setflow-manifest/1";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: RunKind,
    pub config_sha256: String,
    /// Relative path to SHA-256, sorted.
    pub files: BTreeMap<String, String>,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("manifest serializes");
        v.push(b'\n');
        v
    }

    /// Hash of the manifest file itself.
    pub fn hash(&self) -> String {
        sha256_hex(&self.to_bytes())
    }
}

struct OutDir {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    fn path(&self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(p)
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(rel)?;
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    /// Mask plus grid sidecar.
    fn mask(&mut self, rel: &str, z: &BinaryField) -> Result<()> {
        let p = self.path(rel)?;
        write_mask(z, &p)?;
        let side = p.with_extension("json");
        let side_rel = Path::new(rel).with_extension("json").to_string_lossy().into_owned();
        for (r, q) in [(rel.to_string(), p), (side_rel, side)] {
            let bytes = fs::read(&q).map_err(|e| Error::io(&q, e))?;
            self.files.insert(r, sha256_hex(&bytes));
        }
        Ok(())
    }

    fn finish(self, config: &ScenarioConfig, config_bytes: &[u8], summary: serde_json::Value) -> Result<Manifest> {
        let manifest = Manifest {
            format: MANIFEST_FORMAT.into(),
            name: config.name.clone(),
            kind: config.kind,
            config_sha256: sha256_hex(config_bytes),
            files: self.files,
            summary,
        };
        let p = self.root.join("manifest.json");
        fs::write(&p, manifest.to_bytes()).map_err(|e| Error::io(&p, e))?;
        Ok(manifest)
    }
}

fn config_bytes(config: &ScenarioConfig) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(config)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn audit_file(r: &AuditReport) -> String {
    format!("audits/{}.json", r.check)
}

fn audit_summary(reports: &[AuditReport]) -> serde_json::Value {
    reports
        .iter()
        .map(|r| (r.check.clone(), serde_json::to_value(r.status).expect("status")))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

/// Writes a grid run. The emitted `config.json` reloads to the same
/// scenario; a mask initial condition is copied next to it.
pub fn emit_grid(run: &GridRun, traj: &Trajectory, reports: &[AuditReport], dir: &Path) -> Result<Manifest> {
    let mut out = OutDir::create(dir)?;
    let mut config = run.config.clone();
    if let Some(InitialSpec::Mask(_)) = &config.initial {
        out.mask("initial.pgm", &run.scenario.initial)?;
        config.initial = Some(InitialSpec::Mask(PathBuf::from("initial.pgm")));
    }
    let cfg = config_bytes(&config)?;
    out.write("config.json", &cfg)?;
    let opts = &run.config.outputs;
    if opts.emit_masks {
        for (i, st) in traj.steps.iter().enumerate() {
            out.mask(&format!("masks/step_{i:04}.pgm"), &st.mask)?;
        }
    }
    let energies = traj.energies();
    out.write("energy.csv", &csv_bytes(|b| write_energy_csv(&energies, b))?)?;
    let steps = csv_bytes(|b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record([
            "step", "t", "volume", "perimeter", "level", "iterations", "gap", "slack", "power_prev", "power_next",
        ])?;
        for (i, st) in traj.steps.iter().enumerate() {
            let c = st.certificate.as_ref();
            w.write_record([
                i.to_string(),
                st.t.to_string(),
                volume(&st.mask).to_string(),
                st.energy.perimeter.to_string(),
                c.map_or(String::new(), |c| c.level.map_or("none".into(), |l| l.to_string())),
                c.map_or(String::new(), |c| c.iterations.to_string()),
                c.map_or(String::new(), |c| c.gap.to_string()),
                st.slack.to_string(),
                st.power_prev.to_string(),
                st.power_next.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<steps csv>", e))
    })?;
    out.write("steps.csv", &steps)?;
    for r in reports {
        out.json(&audit_file(r), r)?;
    }
    if opts.emit_telemetry {
        let certs: Vec<_> = traj.steps.iter().map(|s| s.certificate).collect();
        out.json("certificates.json", &certs)?;
    }
    if opts.emit_plots && !traj.steps.is_empty() {
        let s = &run.scenario;
        let masks: Vec<&BinaryField> = traj.steps.iter().map(|st| &st.mask).collect();
        let forced = s.forcing.open_set(*s.times.last().expect("times"), &s.grid);
        out.write("plots/evolution.svg", mask_overlay_svg(&masks, Some(&forced)).as_bytes())?;
    }
    let last = traj.steps.last();
    let summary = serde_json::json!({
        "steps": traj.steps.len(),
        "final_time": last.map(|s| s.t),
        "final_volume": last.map(|s| volume(&s.mask)),
        "final_energy": last.map(|s| s.energy.total),
        "dissipation": last.map(|s| s.energy.dissipation_cum),
        "scheme": run.scenario.scheme.name(),
        "audits": audit_summary(reports),
    });
    out.finish(&config, &cfg, summary)
}

/// Audit JSONs only, for verification runs.
pub fn emit_audits(config: &ScenarioConfig, reports: &[AuditReport], dir: &Path) -> Result<Manifest> {
    let mut out = OutDir::create(dir)?;
    let cfg = config_bytes(config)?;
    out.write("config.json", &cfg)?;
    for r in reports {
        out.json(&audit_file(r), r)?;
    }
    out.finish(config, &cfg, serde_json::json!({ "audits": audit_summary(reports) }))
}

/// A single step: mask, certificate, telemetry and an overlay plot.
pub fn emit_step(
    config: &ScenarioConfig,
    prev: &BinaryField,
    forced: &BinaryField,
    outcome: &StepOutcome,
    dir: &Path,
) -> Result<Manifest> {
    let mut out = OutDir::create(dir)?;
    let cfg = config_bytes(config)?;
    out.write("config.json", &cfg)?;
    if config.outputs.emit_masks {
        out.mask("mask.pgm", &outcome.mask)?;
    }
    let summary = serde_json::json!({
        "value": outcome.value,
        "perimeter": outcome.perimeter,
        "volume": volume(&outcome.mask),
        "cells": outcome.mask.count_ones(),
        "certificate": outcome.certificate,
    });
    out.json("step.json", &summary)?;
    if config.outputs.emit_telemetry {
        out.write("telemetry.csv", &csv_bytes(|b| write_telemetry_csv(&outcome.telemetry, b))?)?;
    }
    if config.outputs.emit_plots {
        out.write("plots/step.svg", mask_overlay_svg(&[prev, &outcome.mask], Some(forced)).as_bytes())?;
    }
    out.finish(config, &cfg, summary)
}

/// Solution of one profile problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileRunOutput {
    pub a: f64,
    pub solution: ProfileSolution,
    pub curvature: CurvatureReport,
    pub contact_length: f64,
}

pub fn emit_profile(run: &ProfileRun, results: &[ProfileRunOutput], dir: &Path) -> Result<Manifest> {
    let mut out = OutDir::create(dir)?;
    let cfg = config_bytes(&run.config)?;
    out.write("config.json", &cfg)?;
    let mut rows = Vec::new();
    for r in results {
        let tag = format!("a{}", r.a);
        let p = &r.solution.profile;
        out.write(&format!("profile_{tag}.csv"), &csv_bytes(|b| p.write_csv(b))?)?;
        let info = serde_json::json!({
            "a": r.a,
            "objective": r.solution.objective,
            "stationarity": r.solution.stationarity,
            "iterations": r.solution.iterations,
            "contact_length": r.contact_length,
            "curvature_max_deviation": r.curvature.max_deviation(),
            "curvature": r.curvature,
        });
        out.json(&format!("profile_{tag}.json"), &info)?;
        if run.config.outputs.emit_plots {
            out.write(&format!("plots/profile_{tag}_half.svg"), profile_svg(p, r.a, false).as_bytes())?;
            out.write(&format!("plots/profile_{tag}_full.svg"), profile_svg(p, r.a, true).as_bytes())?;
        }
        rows.push(info);
    }
    out.finish(&run.config, &cfg, serde_json::json!({ "profiles": rows }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::run;
    use crate::scenario_io::{load_scenario, parse_scenario, LoadedScenario};

    fn grid_run(text: &str) -> GridRun {
        match parse_scenario(text, Path::new(".")).unwrap() {
            LoadedScenario::Grid(g) => g,
            _ => panic!(),
        }
    }

    #[test]
    fn empty_trajectory_gives_manifest_and_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid_run(r#"{"domain": {"cells": [8, 8]}}"#);
        let traj = Trajectory { a: 5.0, steps: vec![] };
        let m = emit_grid(&g, &traj, &[], dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("energy.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("t,perimeter"));
        assert!(dir.path().join("manifest.json").exists());
        assert!(m.files.contains_key("energy.csv"));
    }

    #[test]
    fn emitted_config_round_trips_and_hashes_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"{"name": "rt", "domain": {"cells": [24, 24]}, "time": {"T": 1, "steps": 2},
            "perimeter_scheme": "crofton-8", "initial": {"shape": {"kind": "ball", "center": [0, 0], "radius": 1.5}},
            "forcing": {"builder": "shrinking-balls", "centers": [[0, 0]], "schedule": [[0, 1.6], [1, 0.8]]}}"#;
        let g = grid_run(text);
        let traj = run(&g.scenario).unwrap();
        let m1 = emit_grid(&g, &traj, &[], &dir.path().join("a")).unwrap();
        let again = match load_scenario(&dir.path().join("a/config.json")).unwrap() {
            LoadedScenario::Grid(g) => g,
            _ => panic!(),
        };
        assert_eq!(again.config, g.config);
        assert_eq!(again.scenario.initial, g.scenario.initial);
        let traj2 = run(&again.scenario).unwrap();
        let m2 = emit_grid(&again, &traj2, &[], &dir.path().join("b")).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1.hash(), m2.hash());
        let on_disk = fs::read(dir.path().join("a/manifest.json")).unwrap();
        assert_eq!(sha256_hex(&on_disk), m1.hash());
        assert!(m1.files.contains_key("masks/step_0002.pgm"));
        assert!(m1.files.contains_key("plots/evolution.svg"));
    }

    #[test]
    fn mask_initial_is_copied_next_to_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src");
        fs::create_dir_all(&src).unwrap();
        let grid = crate::geometry::GridSpec::default_domain(16).unwrap();
        let z = BinaryField::from_fn(&grid, |i, j| i + j < 20);
        write_mask(&z, &src.join("start.pgm")).unwrap();
        let cfg = src.join("cfg.json");
        fs::write(&cfg, r#"{"domain": {"cells": [16, 16]}, "time": {"T": 1, "steps": 1}, "initial": {"mask": "start.pgm"}}"#).unwrap();
        let g = match load_scenario(&cfg).unwrap() {
            LoadedScenario::Grid(g) => g,
            _ => panic!(),
        };
        assert_eq!(g.scenario.initial, z);
        let traj = run(&g.scenario).unwrap();
        emit_grid(&g, &traj, &[], &dir.path().join("out")).unwrap();
        match load_scenario(&dir.path().join("out/config.json")).unwrap() {
            LoadedScenario::Grid(again) => assert_eq!(again.scenario.initial, z),
            _ => panic!(),
        }
    }

    #[test]
    fn audit_only_output_has_no_masks() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid_run(r#"{"domain": {"cells": [16, 16]}, "time": {"T": 1, "steps": 1}}"#);
        let traj = run(&g.scenario).unwrap();
        let reports = crate::verify::audit_trajectory(&traj, &g.scenario, &g.audits).unwrap();
        let m = emit_audits(&g.config, &reports, dir.path()).unwrap();
        assert!(m.files.keys().all(|k| k == "config.json" || k.starts_with("audits/")));
        assert!(m.files.contains_key("audits/energy.json"));
    }
}
