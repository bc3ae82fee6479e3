use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use movdet_core::detect::{Pipeline, StageTimings};
use movdet_core::eval::{evaluate_sequence, report_csv, report_text, Metrics};
use movdet_core::io::{
    load_sequence_with, parse_annotations, write_frame_boxes, write_overlay, write_synth_sequence, CameraMotion,
    SequenceManifest, SpriteConfig, SynthConfig, SynthGenerator, IMAGES_DIR,
};
use movdet_core::BoundingBox;

use crate::{CliError, RunConfig};

pub fn detect(
    seq: &Path,
    dir: Option<PathBuf>,
    overlay: bool,
    config: &RunConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let manifest = load_sequence_with(seq, config.load_options())?;
    warn(&manifest, err);
    let dir = dir.unwrap_or_else(|| seq.join("detections"));
    let stems = manifest.frame_stems();
    let mut pipeline = Pipeline::new(config.pipeline()?)?;
    let mut total = 0;
    for (i, stem) in stems.iter().enumerate() {
        let frame = manifest.load_frame(i)?;
        let boxes = pipeline.process_frame(&frame)?.boxes;
        write_frame_boxes(&dir, stem, &boxes)?;
        if overlay {
            write_overlay(&dir.join("overlay"), stem, &frame, &boxes)?;
        }
        total += boxes.len();
    }
    writeln!(
        out,
        "{}: {} frames, {} boxes, written to {}",
        manifest.name,
        manifest.frame_count,
        total,
        dir.display()
    )?;
    Ok(())
}

pub fn evaluate(
    path: &Path,
    detections: Option<&Path>,
    csv: bool,
    config: &RunConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let sequences = discover(path)?;
    let single = sequences.len() == 1 && sequences[0] == path;
    let mut rows: Vec<(String, Metrics)> = Vec::new();
    for seq in &sequences {
        let manifest = load_sequence_with(seq, config.load_options())?;
        warn(&manifest, err);
        let gt: Vec<Vec<BoundingBox>> = manifest.load_annotations()?.into_iter().map(|a| a.boxes).collect();
        let det = match detections {
            Some(root) => {
                let dir = if single { root.to_path_buf() } else { root.join(&manifest.name) };
                read_detections(&dir, &manifest.frame_stems())?
            }
            None => run_detector(&manifest, config)?,
        };
        let metrics = evaluate_sequence(&gt, &det, config.tau, config.skip_frames)?;
        rows.push((manifest.name.clone(), metrics));
    }
    let report = if csv { report_csv(&rows) } else { report_text(&rows) };
    write!(out, "{report}")?;
    Ok(())
}

pub fn synth(description: &Path, dir: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let text = fs::read_to_string(description).map_err(|e| CliError::Data(format!("{}: {e}", description.display())))?;
    let config: SynthConfig =
        toml::from_str(&text).map_err(|e| CliError::Data(format!("{}: {}", description.display(), e.to_string().trim())))?;
    write_synth_sequence(&config, dir)?;
    writeln!(
        out,
        "wrote {} frames of {}x{} with {} sprite(s) to {}",
        config.frame_count,
        config.width,
        config.height,
        config.sprites.len(),
        dir.display()
    )?;
    Ok(())
}

pub enum BenchSource {
    Sequence(PathBuf),
    Synthetic((u32, u32)),
}

/// Parses `WIDTHxHEIGHT`.
pub fn parse_size(text: &str) -> Result<(u32, u32), CliError> {
    let bad = || CliError::Usage(format!("expected WIDTHxHEIGHT, got {text:?}"));
    let (w, h) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let (w, h) = (w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?);
    if w < 16 || h < 16 {
        return Err(bad());
    }
    Ok((w, h))
}

/// The synthetic scene used by `bench --synth`: a 2 px/frame pan and one
/// 20x20 sprite moving 3 px/frame (slower if it would leave the frame).
pub fn bench_scene(width: u32, height: u32, frames: usize) -> SynthConfig {
    let room = width.saturating_sub(40) as f64 / frames.max(1) as f64;
    SynthConfig {
        width,
        height,
        frame_count: frames,
        camera: CameraMotion {
            tx: 2.0,
            ..CameraMotion::default()
        },
        sprites: vec![SpriteConfig {
            x: 10.0,
            y: (height / 2).saturating_sub(10) as f64,
            w: 20,
            h: 20,
            vx: room.min(3.0),
            vy: 0.0,
            color: [220, 60, 60],
        }],
        ..SynthConfig::default()
    }
}

pub fn bench(
    source: BenchSource,
    frames: Option<usize>,
    config: &RunConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let clock = Instant::now();
    let (label, images) = match source {
        BenchSource::Sequence(seq) => {
            let manifest = load_sequence_with(&seq, config.load_options())?;
            warn(&manifest, err);
            let n = frames.unwrap_or(manifest.frame_count).min(manifest.frame_count);
            let images = (0..n).map(|i| manifest.load_frame(i)).collect::<Result<Vec<_>, _>>()?;
            (manifest.name.clone(), images)
        }
        BenchSource::Synthetic((w, h)) => {
            let n = frames.unwrap_or(100);
            let generator = SynthGenerator::new(bench_scene(w, h, n))?;
            let images = (0..n).map(|t| generator.frame(t).map(|f| f.0)).collect::<Result<Vec<_>, _>>()?;
            ("synthetic".to_string(), images)
        }
    };
    if images.is_empty() {
        return Err(CliError::Usage("nothing to benchmark: zero frames".into()));
    }
    let load = clock.elapsed();

    let mut pipeline = Pipeline::new(config.pipeline()?)?;
    let mut stages = StageTimings::default();
    let clock = Instant::now();
    for image in &images {
        pipeline.process_frame(image)?;
        stages.accumulate(pipeline.last_timings());
    }
    let elapsed = clock.elapsed();

    let n = images.len();
    let (w, h) = images[0].dimensions();
    let per_frame = elapsed / n as u32;
    let ms = |d: Duration| d.as_secs_f64() * 1e3;
    writeln!(out, "sequence     {label}")?;
    writeln!(out, "resolution   {w}x{h}")?;
    writeln!(out, "frames       {n}")?;
    writeln!(out, "load         {:.1} ms", ms(load))?;
    writeln!(out, "total        {:.1} ms", ms(elapsed))?;
    writeln!(out, "per frame    {:.2} ms", ms(per_frame))?;
    writeln!(out, "fps          {:.2}", n as f64 / elapsed.as_secs_f64())?;
    writeln!(out, "stage        ms/frame")?;
    for (name, d) in StageTimings::NAMES.iter().zip(stages.as_array()) {
        writeln!(out, "  {name:<10} {:.2}", ms(d) / n as f64)?;
    }
    Ok(())
}

/// `path` itself when it holds images/, otherwise its subdirectories that do.
fn discover(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if path.join(IMAGES_DIR).is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        return Err(movdet_core::Error::NotFound(path.to_path_buf()).into());
    }
    let mut found: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(IMAGES_DIR).is_dir())
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(CliError::Data(format!("{}: no sequence directories found", path.display())));
    }
    Ok(found)
}

fn read_detections(dir: &Path, stems: &[String]) -> Result<Vec<Vec<BoundingBox>>, CliError> {
    stems
        .iter()
        .enumerate()
        .map(|(i, stem)| Ok(parse_annotations(&dir.join(format!("{stem}.txt")), i)?.boxes))
        .collect()
}

fn run_detector(manifest: &SequenceManifest, config: &RunConfig) -> Result<Vec<Vec<BoundingBox>>, CliError> {
    let mut pipeline = Pipeline::new(config.pipeline()?)?;
    (0..manifest.frame_count)
        .map(|i| Ok(pipeline.process_frame(&manifest.load_frame(i)?)?.boxes))
        .collect()
}

fn warn(manifest: &SequenceManifest, err: &mut dyn Write) {
    for w in &manifest.warnings {
        let _ = writeln!(err, "warning: {}: {w}", manifest.name);
    }
}
