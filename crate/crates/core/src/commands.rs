//! Command implementations behind the CLI. Each command validates its
//! inputs and configuration before writing anything.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::io::{self, AbundanceMap, Cube, Mask};
use crate::pipeline::{run_cross_validation, train_pipeline, CrossValidation, PipelineModel};
use crate::render;
use crate::spectra::{rmse, train_val_split, AbundanceClass, Dataset, LabeledSample};
use crate::synth::{generate_scene, make_endmembers_with, pick_labeled, Endmember};
use crate::contrastive::history_csv;
use crate::{Error, Result};

pub const SCENE_FILE: &str = "scene.hscn";
pub const TRUTH_FILE: &str = "truth.habn";
pub const ENDMEMBERS_FILE: &str = "endmembers.csv";
pub const LABELED_FILE: &str = "labeled.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedFiles {
    pub scene: PathBuf,
    pub truth: PathBuf,
    pub endmembers: PathBuf,
    pub labeled: PathBuf,
}

impl GeneratedFiles {
    pub fn in_dir(dir: &Path) -> Self {
        GeneratedFiles {
            scene: dir.join(SCENE_FILE),
            truth: dir.join(TRUTH_FILE),
            endmembers: dir.join(ENDMEMBERS_FILE),
            labeled: dir.join(LABELED_FILE),
        }
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn endmembers_csv(endmembers: &[Endmember; 3]) -> String {
    let mut out = String::from("band,healthy,affected,dead\n");
    for b in 0..endmembers[0].spectrum.len() {
        let v = endmembers.each_ref().map(|e| e.spectrum.values()[b]);
        out.push_str(&format!("{b},{},{},{}\n", v[0], v[1], v[2]));
    }
    out
}

/// Writes the scene cube, its truth map, the endmembers and `cfg.labeled`
/// labeled pixels into `dir`. The labeled spectra are read back from the
/// f32-quantized cube so they match the stored pixels exactly.
pub fn cmd_generate(cfg: &RunConfig, dir: &Path) -> Result<GeneratedFiles> {
    cfg.validate()?;
    let scene_cfg = cfg.scene_config();
    if cfg.labeled > scene_cfg.height * scene_cfg.width {
        return Err(Error::Config(format!(
            "labeled = {} exceeds the {} scene pixels",
            cfg.labeled,
            scene_cfg.height * scene_cfg.width
        )));
    }
    let endmembers = make_endmembers_with(cfg.bands, cfg.seed, cfg.narrow_fraction)?;
    let mut scene = generate_scene(&scene_cfg, &endmembers)?;
    let cube_bytes = scene.cube.to_bytes()?;
    scene.cube = Cube::from_bytes(&cube_bytes)?;
    let labeled = pick_labeled(&scene, cfg.labeled, cfg.seed)?;

    let truth_bytes = scene.truth_map()?.to_bytes()?;
    let labeled_csv = io::labeled_csv_string(&labeled)?;
    let files = GeneratedFiles::in_dir(dir);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&files.scene, &cube_bytes)?;
    write(&files.truth, &truth_bytes)?;
    write(&files.endmembers, endmembers_csv(&endmembers).as_bytes())?;
    write(&files.labeled, labeled_csv.as_bytes())?;
    Ok(files)
}

/// Every cube pixel as unlabeled data plus the labeled CSV.
pub fn load_dataset(cube: &Path, labeled: &Path) -> Result<Dataset> {
    let cube = io::load_unlabeled_cube(cube)?;
    let table = io::load_labeled_csv(labeled)?;
    if table.band_count != cube.bands {
        return Err(Error::Shape(format!(
            "{} has {} bands but the cube has {}",
            labeled.display(),
            table.band_count,
            cube.bands
        )));
    }
    Dataset::new(cube.bands, table.samples, cube.spectra()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub train_count: usize,
    pub validation_count: usize,
    /// Per-class validation RMSE; `None` when the split left no validation samples.
    pub validation_rmse: Option<[f64; 3]>,
    pub warning: Option<String>,
    pub pretrain_history: PathBuf,
    pub finetune_history: PathBuf,
}

/// `<checkpoint>.pretrain.csv` and `<checkpoint>.finetune.csv`.
pub fn history_paths(checkpoint: &Path) -> (PathBuf, PathBuf) {
    let with = |suffix: &str| {
        let mut s = checkpoint.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    (with(".pretrain.csv"), with(".finetune.csv"))
}

fn per_class_rmse(model: &PipelineModel, samples: &[LabeledSample]) -> Result<[f64; 3]> {
    let spectra: Vec<&[f64]> = samples.iter().map(|s| s.spectrum.values()).collect();
    let predicted = model.predict_many(&spectra)?;
    let mut out = [0.0; 3];
    for class in AbundanceClass::ALL {
        let p: Vec<f64> = predicted.iter().map(|a| a.get(class)).collect();
        let t: Vec<f64> = samples.iter().map(|s| s.label.get(class)).collect();
        out[class.index()] = rmse(&p, &t)?;
    }
    Ok(out)
}

/// Trains on the `cfg.split` share of the labeled samples and scores the rest.
pub fn cmd_train(cfg: &RunConfig, cube: &Path, labeled: &Path, checkpoint: &Path) -> Result<TrainSummary> {
    cfg.validate()?;
    let dataset = load_dataset(cube, labeled)?;
    let n = dataset.labeled().len();
    if n == 0 {
        return Err(Error::Invalid(format!("{} has no labeled samples", labeled.display())));
    }
    let split = train_val_split(&(0..n).collect::<Vec<_>>(), cfg.split, cfg.seed)?;
    let train = Dataset::new(
        dataset.band_count(),
        dataset.labeled_subset(&split.train),
        dataset.unlabeled().to_vec(),
    )?;
    let held = dataset.labeled_subset(&split.val);
    let trained = train_pipeline(&train, &cfg.pipeline_config(), cfg.seed)?;
    let validation_rmse = if held.is_empty() {
        None
    } else {
        Some(per_class_rmse(&trained.model, &held)?)
    };

    let (pre_path, ft_path) = history_paths(checkpoint);
    write(checkpoint, &trained.model.to_bytes())?;
    write(&pre_path, history_csv(&trained.pretrain_history).as_bytes())?;
    write(&ft_path, history_csv(&trained.finetune_history).as_bytes())?;
    Ok(TrainSummary {
        train_count: split.train.len(),
        validation_count: split.val.len(),
        validation_rmse,
        warning: split.warning,
        pretrain_history: pre_path,
        finetune_history: ft_path,
    })
}

/// Runs k-fold cross-validation of all methods and writes the report CSV.
pub fn cmd_evaluate(cfg: &RunConfig, cube: &Path, labeled: &Path, report: &Path) -> Result<CrossValidation> {
    cfg.validate()?;
    let dataset = load_dataset(cube, labeled)?;
    if dataset.labeled().len() < cfg.k {
        return Err(Error::Invalid(format!(
            "{} labeled samples cannot fill {} folds",
            dataset.labeled().len(),
            cfg.k
        )));
    }
    let eval = cfg.evaluation_config(dataset.band_count())?;
    let cv = run_cross_validation(&dataset, &eval, cfg.seed)?;
    write(report, cv.to_csv().as_bytes())?;
    Ok(cv)
}

/// Predicts every pixel, or only active pixels when a mask is given. Masked
/// output has a fourth flag channel and `(0, 0, 0, 0)` at masked pixels.
pub fn predict_map(model: &PipelineModel, cube: &Cube, mask: Option<&Mask>) -> Result<AbundanceMap> {
    if cube.bands != model.bands() {
        return Err(Error::Shape(format!(
            "checkpoint expects {} bands, cube has {}",
            model.bands(),
            cube.bands
        )));
    }
    let Some(mask) = mask else {
        let spectra: Vec<&[f64]> = (0..cube.pixel_count()).map(|i| cube.pixel(i)).collect();
        return AbundanceMap::from_abundances(cube.height, cube.width, &model.predict_many(&spectra)?);
    };
    if (mask.height, mask.width) != (cube.height, cube.width) {
        return Err(Error::Shape(format!(
            "mask is {}x{}, cube is {}x{}",
            mask.height, mask.width, cube.height, cube.width
        )));
    }
    let active: Vec<usize> = (0..cube.pixel_count()).filter(|&i| mask.active[i]).collect();
    let spectra: Vec<&[f64]> = active.iter().map(|&i| cube.pixel(i)).collect();
    let predicted = model.predict_many(&spectra)?;
    let mut values = vec![0.0; 4 * cube.pixel_count()];
    for (&i, a) in active.iter().zip(&predicted) {
        values[4 * i..4 * i + 3].copy_from_slice(&a.as_array());
        values[4 * i + 3] = 1.0;
    }
    AbundanceMap::new(cube.height, cube.width, 4, values)
}

pub fn cmd_predict_map(checkpoint: &Path, cube: &Path, mask: Option<&Path>, out: &Path) -> Result<AbundanceMap> {
    let model = PipelineModel::load(checkpoint)?;
    let cube = io::load_unlabeled_cube(cube)?;
    let mask = mask.map(io::load_mask).transpose()?;
    let map = predict_map(&model, &cube, mask.as_ref())?;
    io::write_abundance_map(out, &map)?;
    Ok(map)
}

/// Renders `map` to a PPM, pooling channel ranges with any `joint` maps.
pub fn cmd_render_map(map: &Path, joint: &[PathBuf], out: &Path) -> Result<()> {
    let main = io::load_abundance_map(map)?;
    let others = joint
        .iter()
        .map(|p| io::load_abundance_map(p))
        .collect::<Result<Vec<_>>>()?;
    render::render_map_file(&main, &others, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SvrMode;
    use crate::spectra::AbundanceVector;

    fn tiny() -> RunConfig {
        RunConfig {
            height: 6,
            width: 6,
            bands: 24,
            labeled: 12,
            epochs_self: 1,
            epochs_ft: 2,
            batch_size: 16,
            svr_mode: SvrMode::Fixed,
            k: 3,
            aggregated_bands: 6,
            ..RunConfig::default()
        }
    }

    #[test]
    fn generate_writes_consistent_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = cmd_generate(&tiny(), dir.path()).unwrap();
        let cube = io::load_unlabeled_cube(&files.scene).unwrap();
        assert_eq!((cube.height, cube.width, cube.bands), (6, 6, 24));
        let table = io::load_labeled_csv(&files.labeled).unwrap();
        assert_eq!(table.samples.len(), 12);
        let truth = io::load_abundance_map(&files.truth).unwrap();
        for s in &table.samples {
            let i: usize = s.id[2..].parse().unwrap();
            assert_eq!(s.spectrum.values(), cube.pixel(i));
            for (a, b) in s.label.as_array().iter().zip(truth.abundance(i)) {
                assert!((a - b).abs() < 1e-7, "truth map is f32");
            }
        }
        let em = fs::read_to_string(&files.endmembers).unwrap();
        assert_eq!(em.lines().count(), 25);
    }

    #[test]
    fn generate_validates_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("scene");
        for cfg in [RunConfig { height: 0, ..tiny() }, RunConfig { labeled: 37, ..tiny() }] {
            assert!(cmd_generate(&cfg, &out).is_err());
            assert!(!out.exists());
        }
    }

    #[test]
    fn predict_map_matches_per_pixel_and_respects_mask() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let files = cmd_generate(&cfg, dir.path()).unwrap();
        let ckpt = dir.path().join("model.bin");
        let summary = cmd_train(&cfg, &files.scene, &files.labeled, &ckpt).unwrap();
        assert_eq!((summary.train_count, summary.validation_count), (8, 4));
        assert!(summary.pretrain_history.exists() && summary.finetune_history.exists());

        let model = PipelineModel::load(&ckpt).unwrap();
        let cube = io::load_unlabeled_cube(&files.scene).unwrap();
        let full = predict_map(&model, &cube, None).unwrap();
        for i in 0..cube.pixel_count() {
            let single = model.predict_abundance(cube.pixel(i)).unwrap();
            assert_eq!(full.abundance(i), single.as_array());
        }
        let mask = Mask { height: 6, width: 6, active: (0..36).map(|i| i % 3 != 0).collect() };
        let masked = predict_map(&model, &cube, Some(&mask)).unwrap();
        assert_eq!(masked.channels, 4);
        for i in 0..36 {
            assert_eq!(masked.is_active(i), mask.active[i]);
            if mask.active[i] {
                assert_eq!(masked.abundance(i), full.abundance(i));
                AbundanceVector::new(full.abundance(i)[0], full.abundance(i)[1], full.abundance(i)[2]).unwrap();
            } else {
                assert_eq!(masked.abundance(i), [0.0; 3]);
            }
        }
        let wrong = Mask { height: 3, width: 12, active: vec![true; 36] };
        assert!(predict_map(&model, &cube, Some(&wrong)).is_err());
    }

    #[test]
    fn missing_inputs_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.hscn");
        let e = cmd_train(&tiny(), &missing, &missing, &dir.path().join("m")).unwrap_err();
        assert!(e.to_string().contains("nope.hscn"), "{e}");
        assert!(!dir.path().join("m").exists());
    }

    #[test]
    fn evaluate_requires_enough_samples() {
        let dir = tempfile::tempdir().unwrap();
        let files = cmd_generate(&RunConfig { labeled: 2, ..tiny() }, dir.path()).unwrap();
        let report = dir.path().join("r.csv");
        assert!(cmd_evaluate(&tiny(), &files.scene, &files.labeled, &report).is_err());
        assert!(!report.exists());
    }

    #[test]
    fn history_paths_append_suffixes() {
        let (a, b) = history_paths(Path::new("out/model.bin"));
        assert_eq!(a, Path::new("out/model.bin.pretrain.csv"));
        assert_eq!(b, Path::new("out/model.bin.finetune.csv"));
    }
}
