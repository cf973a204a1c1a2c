use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use brownfield_core::clustering::{cluster_class_detailed, cluster_report_csv, ClusterReportRow};
use brownfield_core::export::{compute_savings, format_euros, parse_aml, write_aml, PoseSource, SceneModel};
use brownfield_core::geometry::{accuracy_mm, completeness, density, load_cloud, save_cloud, PointCloud};
use brownfield_core::pose::{estimate_all, match_poses, ObjectPose, PoseParams};
use brownfield_core::scene::{generate_scene, sample_reference, Class, SceneSpec};
use brownfield_core::segnet::{
    labeled_blocks, load_checkpoint, metrics_csv, predict_class, save_checkpoint, segment_cloud, train, PredictiveSamples,
};
use brownfield_core::uncertainty::{filter_certain, Method as UncertaintyMethod, UncertaintyReport};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::manifest::{config_hash, RunManifest};
use crate::{CliError, Command, PipelineConfig};

/// Independent sub-seed for one use of the pipeline seed.
pub fn derive_seed(seed: u64, purpose: &str, index: usize) -> u64 {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(purpose.as_bytes())
        .chain_update((index as u64).to_le_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// One cloud processed by the test-side stages.
#[derive(Debug, Clone)]
struct Tact {
    name: String,
    cloud: PathBuf,
    /// Ground-truth manifest and per-point instance ids, synthetic tacts only.
    truth: Option<(PathBuf, PathBuf)>,
}

/// Step timings of the running stage.
#[derive(Default)]
struct Timings(BTreeMap<String, f64>);

impl Timings {
    fn time<T>(&mut self, step: impl Into<String>, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.0.entry(step.into()).or_default() += start.elapsed().as_secs_f64();
        out
    }
}

pub struct Pipeline<'a> {
    cfg: PipelineConfig,
    force: bool,
    out: &'a mut dyn Write,
    /// Monte Carlo samples of the segment stage, reused by the uncertainty
    /// stage in the same invocation.
    samples: BTreeMap<String, PredictiveSamples>,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(format!("creating {}", path.display()), e))
}

fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Missing { what: what.to_string(), path: path.to_path_buf() })
    }
}

fn accuracy(pred: &[u32], truth: &[u32], keep: impl Fn(usize) -> bool) -> Option<f64> {
    let (mut hit, mut n) = (0usize, 0usize);
    for i in (0..pred.len()).filter(|&i| keep(i)) {
        n += 1;
        hit += usize::from(pred[i] == truth[i]);
    }
    (n > 0).then(|| hit as f64 / n as f64)
}

fn opt6(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn read_instances(path: &Path) -> Result<Vec<u32>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| {
                CliError::Core(brownfield_core::error::Error::Parse {
                    line: i + 1,
                    message: format!("bad instance id '{l}' in {}", path.display()),
                })
            })
        })
        .collect()
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: PipelineConfig, force: bool, out: &'a mut dyn Write) -> Self {
        Pipeline { cfg, force, out, samples: BTreeMap::new() }
    }

    pub fn run(&mut self, command: &Command) -> Result<(), CliError> {
        match command {
            Command::Synth => self.synth(),
            Command::Train => self.train(),
            Command::Segment => self.segment(),
            Command::Uncertainty => self.uncertainty(),
            Command::Cluster => self.cluster(),
            Command::Pose => self.pose(),
            Command::Export => self.export(),
            Command::Quality { .. } => self.quality(),
            Command::Savings => self.savings(),
            Command::RunAll => {
                self.synth()?;
                self.train()?;
                self.segment()?;
                self.uncertainty()?;
                self.cluster()?;
                self.pose()?;
                self.export()?;
                self.quality()?;
                self.savings()
            }
        }
    }

    fn dir(&self, stage: &str) -> PathBuf {
        self.cfg.out_dir.join(stage)
    }

    fn say(&mut self, line: impl AsRef<str>) {
        let _ = writeln!(self.out, "{}", line.as_ref());
    }

    /// Runs `body` unless the stage's manifest is current; `body` returns
    /// the artifacts it wrote.
    fn stage(
        &mut self,
        name: &str,
        inputs: serde_json::Value,
        resumable: bool,
        body: impl FnOnce(&mut Self, &mut Timings) -> Result<Vec<PathBuf>, CliError>,
    ) -> Result<(), CliError> {
        let hash = config_hash(&json!({ "stage": name, "seed": self.cfg.seed, "inputs": inputs }));
        let out_dir = self.cfg.out_dir.clone();
        if resumable && !self.force {
            if let Some(m) = RunManifest::load(&out_dir, name) {
                if m.is_current(&out_dir, &hash) {
                    self.say(format!("[{name}] up to date, skipped"));
                    return Ok(());
                }
            }
        }
        self.say(format!("[{name}] running"));
        let mut timings = Timings::default();
        let start = Instant::now();
        let artifacts = body(self, &mut timings)?;
        let total = start.elapsed().as_secs_f64();
        timings.0.insert("total".into(), total);
        let artifacts = artifacts
            .into_iter()
            .map(|p| p.strip_prefix(&out_dir).map(Path::to_path_buf).unwrap_or(p))
            .collect();
        RunManifest { stage: name.into(), seed: self.cfg.seed, config_hash: hash, timings: timings.0, artifacts }
            .save(&out_dir)?;
        self.say(format!("[{name}] done in {total:.2} s"));
        Ok(())
    }

    fn tact_spec(&self, split: &str, i: usize) -> SceneSpec {
        SceneSpec { seed: derive_seed(self.cfg.seed, split, i), ..self.cfg.data.scene.clone() }
    }

    fn train_clouds(&self) -> Vec<PathBuf> {
        (0..self.cfg.data.train_tacts).map(|i| self.dir("synth").join(format!("train_{i:02}.xyzl"))).collect()
    }

    fn test_tacts(&self) -> Vec<Tact> {
        if let Some(input) = &self.cfg.data.input {
            return vec![Tact { name: "input".into(), cloud: input.clone(), truth: None }];
        }
        let dir = self.dir("synth");
        (0..self.cfg.data.test_tacts)
            .map(|i| {
                let name = format!("test_{i:02}");
                Tact {
                    cloud: dir.join(format!("{name}.xyzl")),
                    truth: Some((dir.join(format!("{name}.gt.aml")), dir.join(format!("{name}.instances")))),
                    name,
                }
            })
            .collect()
    }

    fn synth(&mut self) -> Result<(), CliError> {
        let inputs = json!({ "data": self.cfg.data });
        self.stage("synth", inputs, true, |p, t| {
            let dir = p.dir("synth");
            ensure_dir(&dir)?;
            let mut artifacts = Vec::new();
            let mut jobs: Vec<(String, SceneSpec, bool)> = (0..p.cfg.data.train_tacts)
                .map(|i| (format!("train_{i:02}"), p.tact_spec("train", i), false))
                .collect();
            if p.cfg.data.input.is_none() {
                jobs.extend((0..p.cfg.data.test_tacts).map(|i| (format!("test_{i:02}"), p.tact_spec("test", i), true)));
            }
            for (name, spec, is_test) in jobs {
                let (cloud, truth) = t.time("generate", || generate_scene(&spec))?;
                let files = [
                    dir.join(format!("{name}.xyzl")),
                    dir.join(format!("{name}.gt.aml")),
                    dir.join(format!("{name}.instances")),
                ];
                t.time("write", || -> Result<(), CliError> {
                    save_cloud(&cloud, &files[0])?;
                    write_aml(&SceneModel::from_ground_truth(&name, &truth), &files[1])?;
                    let ids: String = truth.instances.iter().map(|i| format!("{i}\n")).collect();
                    write_file(&files[2], &ids)
                })?;
                artifacts.extend(files);
                if is_test {
                    // Noise- and hole-free twin for the quality report.
                    let clean = SceneSpec { noise_sigma_mm: 0.0, occlusion_fraction: 0.0, ..spec };
                    let (reference, _) = t.time("generate", || generate_scene(&clean))?;
                    let path = dir.join(format!("{name}.reference.xyzl"));
                    save_cloud(&reference, &path)?;
                    artifacts.push(path);
                }
                p.say(format!("  {name}: {} points, {} objects", cloud.len(), truth.objects.len()));
            }
            Ok(artifacts)
        })
    }

    fn checkpoint_path(&self) -> PathBuf {
        self.dir("train").join("model.ckpt")
    }

    fn train(&mut self) -> Result<(), CliError> {
        let inputs = json!({ "data": self.cfg.data, "segnet": self.cfg.segnet });
        self.stage("train", inputs, true, |p, t| {
            let net_cfg = p.cfg.segnet.network.clone();
            let mut blocks = Vec::new();
            for (i, path) in p.train_clouds().iter().enumerate() {
                require(path, "training cloud")?;
                let cloud = t.time("load", || load_cloud(path))?;
                let seed = derive_seed(p.cfg.seed, "blocks", i);
                blocks.extend(t.time("blocks", || labeled_blocks(&cloud, p.cfg.segnet.block_edge, net_cfg.block_size, seed))?);
            }
            let train_cfg = p.cfg.segnet.train_config(derive_seed(p.cfg.seed, "train", 0));
            p.say(format!("  {} blocks, {} epochs, {} mode", blocks.len(), train_cfg.epochs, net_cfg.mode.name()));
            let outcome = t.time("train", || train(&train_cfg, &net_cfg, &blocks))?;
            if let Some(last) = outcome.metrics.last() {
                p.say(format!("  final epoch: loss {:.4}, block accuracy {:.4}", last.loss, last.accuracy));
            }
            let ckpt = p.checkpoint_path();
            let metrics = p.dir("train").join("metrics.csv");
            ensure_dir(&p.dir("train"))?;
            save_checkpoint(&outcome.network, &ckpt)?;
            write_file(&metrics, &metrics_csv(&outcome.metrics))?;
            Ok(vec![ckpt, metrics])
        })
    }

    /// Monte Carlo class probabilities of test tact `i`.
    fn mc_samples(&mut self, i: usize, tact: &Tact, t: &mut Timings) -> Result<PredictiveSamples, CliError> {
        if let Some(s) = self.samples.get(&tact.name) {
            return Ok(s.clone());
        }
        let ckpt = self.checkpoint_path();
        require(&ckpt, "checkpoint")?;
        let net = load_checkpoint(&ckpt)?;
        require(&tact.cloud, "test cloud")?;
        let cloud = load_cloud(&tact.cloud)?;
        let seed = derive_seed(self.cfg.seed, "mc", i);
        let s = t.time("inference", || segment_cloud(&net, &cloud, self.cfg.segnet.block_edge, self.cfg.segnet.mc_samples, seed))?;
        self.samples.insert(tact.name.clone(), s.clone());
        Ok(s)
    }

    fn segment(&mut self) -> Result<(), CliError> {
        let inputs = json!({ "data": self.cfg.data, "segnet": self.cfg.segnet });
        self.stage("segment", inputs, true, |p, t| {
            require(&p.checkpoint_path(), "checkpoint")?;
            let dir = p.dir("segment");
            ensure_dir(&dir)?;
            let mut csv = String::from("tact,points,accuracy\n");
            let mut artifacts = Vec::new();
            for (i, tact) in p.test_tacts().iter().enumerate() {
                let samples = p.mc_samples(i, tact, t)?;
                let cloud = load_cloud(&tact.cloud)?;
                let pred = predict_class(&samples);
                let acc = cloud.labels().and_then(|l| accuracy(&pred, l, |_| true));
                let path = dir.join(format!("{}.seg.xyzl", tact.name));
                save_cloud(&PointCloud::with_labels(cloud.points().to_vec(), pred)?, &path)?;
                artifacts.push(path);
                let _ = writeln!(csv, "{},{},{}", tact.name, cloud.len(), opt6(acc));
                p.say(format!("  {}: {} points, accuracy {}", tact.name, cloud.len(), opt6(acc)));
            }
            let report = dir.join("segmentation.csv");
            write_file(&report, &csv)?;
            artifacts.push(report);
            Ok(artifacts)
        })
    }

    fn uncertainty(&mut self) -> Result<(), CliError> {
        let inputs = json!({ "data": self.cfg.data, "segnet": self.cfg.segnet, "uncertainty": self.cfg.uncertainty });
        self.stage("uncertainty", inputs, true, |p, t| {
            let dir = p.dir("uncertainty");
            ensure_dir(&dir)?;
            let ucfg = p.cfg.uncertainty.clone();
            let mut summary = String::from("tact,method,baseline_accuracy,retained_accuracy,dropped_fraction\n");
            let mut artifacts = Vec::new();
            for (i, tact) in p.test_tacts().iter().enumerate() {
                let seg_path = p.dir("segment").join(format!("{}.seg.xyzl", tact.name));
                require(&seg_path, "segmented cloud")?;
                let samples = p.mc_samples(i, tact, t)?;
                let report = t.time("scores", || UncertaintyReport::compute(&samples, ucfg.k_sigma, ucfg.level))?;
                let truth = load_cloud(&tact.cloud)?;
                let labels = truth.labels();
                let baseline = labels.and_then(|l| accuracy(&report.predicted, l, |_| true));
                for method in UncertaintyMethod::ALL {
                    let flags = report.uncertain(method);
                    let dropped = flags.iter().filter(|&&f| f).count() as f64 / flags.len().max(1) as f64;
                    let retained = labels.and_then(|l| accuracy(&report.predicted, l, |i| !flags[i]));
                    let _ = writeln!(
                        summary,
                        "{},{},{},{},{:.6}",
                        tact.name,
                        method.name(),
                        opt6(baseline),
                        opt6(retained),
                        dropped
                    );
                    p.say(format!(
                        "  {} {:<17} drop {:>6.2}%  accuracy {} -> {}",
                        tact.name,
                        method.name(),
                        100.0 * dropped,
                        opt6(baseline),
                        opt6(retained)
                    ));
                }
                let seg = load_cloud(&seg_path)?;
                let (filtered, _) = filter_certain(&seg, &report.uncertain(ucfg.method))?;
                let scores = dir.join(format!("{}.scores.csv", tact.name));
                let kept = dir.join(format!("{}.filtered.xyzl", tact.name));
                write_file(&scores, &report.to_csv())?;
                save_cloud(&filtered, &kept)?;
                artifacts.extend([scores, kept]);
            }
            let path = dir.join("summary.csv");
            write_file(&path, &summary)?;
            artifacts.push(path);
            Ok(artifacts)
        })
    }

    fn cluster(&mut self) -> Result<(), CliError> {
        let inputs = json!({ "data": self.cfg.data, "clustering": self.cfg.clustering });
        self.stage("cluster", inputs, true, |p, t| {
            let dir = p.dir("cluster");
            ensure_dir(&dir)?;
            let ccfg = p.cfg.clustering.clone();
            let mut artifacts = Vec::new();
            for tact in p.test_tacts() {
                let Some((truth_path, instances_path)) = &tact.truth else {
                    p.say(format!("  {}: no ground truth, clustering report skipped", tact.name));
                    continue;
                };
                require(&tact.cloud, "test cloud")?;
                require(instances_path, "instance ids")?;
                let cloud = load_cloud(&tact.cloud)?;
                let instances = read_instances(instances_path)?;
                let truth = parse_aml(truth_path)?;
                let mut rows = Vec::new();
                for &class in &ccfg.report_classes {
                    let true_count = truth.objects.iter().filter(|o| o.pose.class == class.name()).count();
                    let params = brownfield_core::clustering::ClusterParams {
                        k: ccfg.params.k.or(Some(true_count.max(1))),
                        ..ccfg.params.clone()
                    };
                    for &method in &ccfg.report_methods {
                        let c = t.time(format!("{method}"), || {
                            cluster_class_detailed(&cloud, class.index() as u32, method, &params)
                        })?;
                        let ids: Vec<u32> = c.indices.iter().map(|&i| instances[i]).collect();
                        let row = ClusterReportRow::evaluate(class.name(), method, &c.assignment, &ids);
                        p.say(format!(
                            "  {} {:<8} {:<9} {:>2} clusters (truth {true_count}), mistakes {:.4}%, {:.3} s",
                            tact.name,
                            class.name(),
                            method.to_string(),
                            c.assignment.n_clusters,
                            row.mistakes_pct,
                            c.assignment.runtime
                        ));
                        rows.push(row);
                    }
                }
                // Runtimes stay out of the file so reruns are byte-identical.
                let path = dir.join(format!("{}.csv", tact.name));
                write_file(&path, &cluster_report_csv(&rows, false))?;
                artifacts.push(path);
            }
            Ok(artifacts)
        })
    }

    fn pose_inputs(&self) -> serde_json::Value {
        json!({
            "data": self.cfg.data,
            "segnet": self.cfg.segnet,
            "uncertainty": self.cfg.uncertainty,
            "clustering": self.cfg.clustering,
            "pose": self.cfg.pose,
        })
    }

    fn pose(&mut self) -> Result<(), CliError> {
        let inputs = self.pose_inputs();
        self.stage("pose", inputs, true, |p, t| {
            let dir = p.dir("pose");
            ensure_dir(&dir)?;
            let density = p.cfg.reference_density();
            let mut references = BTreeMap::new();
            for &class in &p.cfg.pose.classes {
                references.insert(class, sample_reference(class, density)?);
            }
            let mut artifacts = Vec::new();
            for (i, tact) in p.test_tacts().iter().enumerate() {
                let input = p.dir("uncertainty").join(format!("{}.filtered.xyzl", tact.name));
                require(&input, "filtered cloud")?;
                let cloud = load_cloud(&input)?;
                let params = PoseParams { seed: derive_seed(p.cfg.seed, "pose", i), ..p.cfg.pose.params };
                let est = t.time("estimate", || {
                    estimate_all(&cloud, &p.cfg.pose.classes, &references, p.cfg.clustering.method, &p.cfg.clustering.params, &params)
                })?;
                let poses_path = dir.join(format!("{}.poses.json", tact.name));
                write_file(&poses_path, &(serde_json::to_string_pretty(&est.poses).expect("poses serialize") + "\n"))?;
                let mut failures = String::from("class,instance,message\n");
                for f in &est.failures {
                    let _ = writeln!(failures, "{},{},\"{}\"", f.class, f.instance, f.message.replace('"', "'"));
                }
                let failures_path = dir.join(format!("{}.failures.csv", tact.name));
                write_file(&failures_path, &failures)?;
                artifacts.extend([poses_path, failures_path]);
                p.say(format!("  {}: {} poses, {} failures", tact.name, est.poses.len(), est.failures.len()));
                if let Some((truth_path, _)) = &tact.truth {
                    let classes = &p.cfg.pose.classes;
                    let truth: Vec<ObjectPose> = parse_aml(truth_path)?
                        .poses()
                        .into_iter()
                        .filter(|t| classes.iter().any(|c| c.name() == t.class))
                        .collect();
                    let dev = dir.join(format!("{}.deviation.csv", tact.name));
                    let counts = dir.join(format!("{}.counts.csv", tact.name));
                    write_file(&dev, &deviation_csv(&est.poses, &truth))?;
                    write_file(&counts, &counts_csv(&est.poses, &truth, classes))?;
                    artifacts.extend([dev, counts]);
                }
            }
            Ok(artifacts)
        })
    }

    fn export(&mut self) -> Result<(), CliError> {
        let inputs = self.pose_inputs();
        self.stage("export", inputs, true, |p, _| {
            let dir = p.dir("export");
            ensure_dir(&dir)?;
            let mut artifacts = Vec::new();
            for tact in p.test_tacts() {
                let src = p.dir("pose").join(format!("{}.poses.json", tact.name));
                require(&src, "pose list")?;
                let text = std::fs::read_to_string(&src).map_err(|e| CliError::io(format!("reading {}", src.display()), e))?;
                let poses: Vec<ObjectPose> = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{} is not a pose list: {e}", src.display())))?;
                let path = dir.join(format!("{}.aml", tact.name));
                write_aml(&SceneModel::from_poses(&tact.name, &poses, PoseSource::Estimated), &path)?;
                p.say(format!("  {} -> {} ({} objects)", tact.name, path.display(), poses.len()));
                artifacts.push(path);
            }
            Ok(artifacts)
        })
    }

    fn quality(&mut self) -> Result<(), CliError> {
        let q = self.cfg.quality.clone();
        let (measured, reference) = match (&q.measured, &q.reference) {
            (Some(m), Some(r)) => (m.clone(), r.clone()),
            (None, None) if self.cfg.data.input.is_none() && self.cfg.data.test_tacts > 0 => {
                let dir = self.dir("synth");
                (dir.join("test_00.xyzl"), dir.join("test_00.reference.xyzl"))
            }
            _ => return Err(CliError::Config("quality needs both a measured and a reference cloud".into())),
        };
        require(&measured, "measured cloud")?;
        require(&reference, "reference cloud")?;
        let inputs = json!({ "quality": q, "measured": file_digest(&measured)?, "reference": file_digest(&reference)? });
        self.stage("quality", inputs, false, |p, t| {
            let m = load_cloud(&measured)?;
            let r = load_cloud(&reference)?;
            let acc = t.time("accuracy", || accuracy_mm(&m, &r))?;
            let comp = t.time("completeness", || completeness(&m, &r, q.tol_mm))?;
            let dens = t.time("density", || density(&m, q.radius_mm))?;
            let name = |path: &Path| path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let csv = format!(
                "measured,reference,points,accuracy_mm,completeness,density\n{},{},{},{acc:.6},{comp:.6},{dens:.6}\n",
                name(&measured),
                name(&reference),
                m.len()
            );
            p.say(format!(
                "  accuracy {acc:.3} mm, completeness {:.2}% within {} mm, density {dens:.2} neighbours within {} mm",
                100.0 * comp,
                q.tol_mm,
                q.radius_mm
            ));
            let path = p.dir("quality").join("quality.csv");
            write_file(&path, &csv)?;
            Ok(vec![path])
        })
    }

    fn savings(&mut self) -> Result<(), CliError> {
        let input = self.cfg.savings;
        self.stage("savings", json!({ "savings": input }), false, |p, _| {
            let s = compute_savings(&input)?;
            p.say(format!("  total cost per year: {} €", format_euros(s.total_cost_per_year)));
            p.say(format!("  savings per year:    {} €", format_euros(s.savings_per_year)));
            let path = p.dir("savings").join("savings.csv");
            write_file(
                &path,
                &format!("total_cost_per_year,savings_per_year\n{:.2},{:.2}\n", s.total_cost_per_year, s.savings_per_year),
            )?;
            Ok(vec![path])
        })
    }
}

/// Deviation of each matched estimate from its true pose.
fn deviation_csv(estimated: &[ObjectPose], truth: &[ObjectPose]) -> String {
    let mut out = String::from("class,instance,truth_instance,dx_mm,dy_mm,dz_mm,droll_deg,dpitch_deg,dyaw_deg\n");
    for (i, j) in match_poses(estimated, truth) {
        let d = estimated[i].deviation(&truth[j]);
        let _ = writeln!(
            out,
            "{},{},{},{:.3},{:.3},{:.3},{:.4},{:.4},{:.4}",
            estimated[i].class, estimated[i].instance, truth[j].instance, d[0], d[1], d[2], d[3], d[4], d[5]
        );
    }
    out
}

/// Estimated and true instance count per class.
fn counts_csv(estimated: &[ObjectPose], truth: &[ObjectPose], classes: &[Class]) -> String {
    let mut out = String::from("class,estimated,truth\n");
    for c in classes {
        let n_est = estimated.iter().filter(|p| p.class == c.name()).count();
        let n_true = truth.iter().filter(|p| p.class == c.name()).count();
        let _ = writeln!(out, "{},{n_est},{n_true}", c.name());
    }
    out
}
