use std::fs;

use dermvgg::data::{load_sample, scan_dataset, LoadOptions, Split};
use dermvgg::metrics::{confusion, emit_report, render_table, report, roc_auc, EvalReport, ReportFormat};
use dermvgg::net::NetworkGraph;
use dermvgg::rng::{stream, Stream};
use dermvgg::train::{argmax, predict_split, train, TrainOptions, FINAL_FILE};
use dermvgg::weights::{self, LoadScope};
use dermvgg::{ArchConfig, Mode};

use crate::config::{echo, EvalConfig, PredictConfig, TrainConfig};
use crate::error::CliError;

pub fn cmd_train(cfg: &TrainConfig) -> Result<(), CliError> {
    echo("train", cfg)?;
    let index = scan_dataset(&cfg.data_dir)?;
    let arch = ArchConfig::vgg16(index.num_classes(), cfg.input_size).with_width_divisor(cfg.width_divisor);
    let mut graph = NetworkGraph::<f32>::build(arch)?;
    let mut init = stream(cfg.seed, Stream::Init);
    graph.init_head(&mut init);
    match &cfg.weights_in {
        Some(path) => {
            weights::load(path, &mut graph, LoadScope::BaseOnly)?;
        }
        None => {
            if cfg.freeze_base {
                eprintln!(
                    "warning: the convolutional base is frozen but no --weights-in was given; \
                     it stays at its random initialization"
                );
            }
            graph.init_base(&mut init);
        }
    }
    graph.set_trainable(cfg.freeze_base);
    println!(
        "classes: {} | train images: {} | test images: {} | trainable parameters: {}",
        index.class_names.join(", "),
        index.entries(Split::Train).len(),
        index.entries(Split::Test).len(),
        graph.trainable_param_count()
    );

    let opts = TrainOptions {
        load: LoadOptions { size: cfg.input_size, normalization: cfg.normalization },
        augment: cfg.augment_config(),
        checkpoint_dir: Some(cfg.out.clone()),
        keep_all_checkpoints: cfg.keep_all_checkpoints,
    };
    let epochs = cfg.epochs;
    train(&mut graph, &index, &cfg.hyper_params(), &opts, |r| {
        println!("epoch {}/{epochs}  loss {:.6}  acc {:.4}  {:.1}s", r.epoch, r.loss, r.acc, r.secs);
    })?;
    println!("saved {}", cfg.out.join(FINAL_FILE).display());
    Ok(())
}

pub fn cmd_evaluate(cfg: &EvalConfig) -> Result<(), CliError> {
    echo("evaluate", cfg)?;
    let (graph, meta) = weights::load_model::<f32>(&cfg.model)?;
    let index = scan_dataset(&cfg.data_dir)?;
    if index.class_names != meta.class_names {
        return Err(CliError::Archive(format!(
            "model classes {:?} differ from dataset classes {:?}",
            meta.class_names, index.class_names
        )));
    }
    let load = LoadOptions { size: meta.input_size, normalization: meta.normalization };
    let preds = predict_split(&graph, &index, Split::Test, load, cfg.batch_size)?;
    let c = index.num_classes();
    let cm = confusion(&preds.labels, &preds.predicted(), c)?.with_class_names(index.class_names.clone())?;
    let rep = report(&cm)?;
    let scores: Vec<Vec<f64>> = preds.probs.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    let curves = (0..c).map(|k| roc_auc(&preds.labels, &scores, k)).collect::<Result<Vec<_>, _>>()?;
    let eval = EvalReport::new(rep, cm, curves)?;

    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Config(format!("{}: {e}", cfg.out.display())))?;
    let mut written = emit_report(&eval, ReportFormat::Json, &cfg.out)?;
    written.extend(emit_report(&eval, ReportFormat::Csv, &cfg.out)?);

    print!("{}", render_table(&eval.report));
    println!();
    println!("confusion matrix (rows = true, columns = predicted):");
    let width = index.class_names.iter().map(String::len).max().unwrap_or(1).max(6);
    print!("{:>width$}", "");
    for name in &index.class_names {
        print!(" {name:>width$}");
    }
    println!();
    for (name, row) in index.class_names.iter().zip(&eval.confusion.counts) {
        print!("{name:>width$}");
        for v in row {
            print!(" {v:>width$}");
        }
        println!();
    }
    println!();
    for curve in &eval.roc {
        println!("AUC {}: {:.4}", index.class_names[curve.class_index], curve.auc);
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_predict(cfg: &PredictConfig) -> Result<(), CliError> {
    echo("predict", cfg)?;
    let (graph, meta) = weights::load_model::<f32>(&cfg.model)?;
    let load = LoadOptions { size: meta.input_size, normalization: meta.normalization };
    let sample = load_sample(&cfg.image, 0, meta.class_names.len(), load)?;
    let s = meta.input_size;
    let x = sample.pixels.reshape([1, 3, s, s]).map_err(|e| CliError::Config(e.to_string()))?;
    // Eval mode never draws from the generator.
    let probs = graph.forward(&x, Mode::Eval, &mut stream(0, Stream::Dropout))?;
    let probs = probs.data();
    println!("predicted: {}", meta.class_names[argmax(probs)]);
    for (name, p) in meta.class_names.iter().zip(probs) {
        println!("{name}: {p:.4}");
    }
    Ok(())
}
