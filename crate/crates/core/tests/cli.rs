use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pcvae::data_io::{synth_split, write_dataset};
use pcvae::kvtext::KvText;
use pcvae::training::{load_checkpoint, InputMode};

fn pcvae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcvae"))
        .args(args)
        .env("PCVAE_THREADS", "1")
        .output()
        .expect("run pcvae")
}

fn code(args: &[&str]) -> i32 {
    pcvae(args).status.code().expect("exit code")
}

fn ok(args: &[&str]) -> String {
    let out = pcvae(args);
    assert!(out.status.success(), "pcvae {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Trains a small desk model into `dir/name` and returns its directory.
fn small_run(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["train", "--synthetic", "32", "--epochs", "2", "--batch", "32", "--out", s(&out)];
    args.extend(extra);
    ok(&args);
    out
}

fn resolved(dir: &Path) -> KvText {
    KvText::parse(&std::fs::read_to_string(dir.join("config.resolved")).unwrap()).unwrap()
}

fn rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().skip(1).map(str::to_string).collect()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(code(&["train", "--data", "/nonexistent/data", "--out", s(&out)]), 2);
    assert_eq!(code(&["train", "--out", s(&out)]), 2);
    assert_eq!(code(&["train", "--synthetic", "32", "--latent", "15", "--out", s(&out)]), 2);
    assert_eq!(code(&["train", "--synthetic", "32", "--bogus"]), 2);
    assert_eq!(code(&["pid", "--case", "nope"]), 2);
    assert_eq!(code(&["generate", "--checkpoint", "/nonexistent.bin", "--from", "audio", "--in", "a.wav"]), 2);
    assert_eq!(code(&["--help"]), 0);
    let diverging = ["train", "--synthetic", "32", "--epochs", "2", "--lr", "1e300", "--out", s(&out)];
    assert_eq!(code(&diverging), 3);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    std::fs::write(&file, "# small run\nepochs = 3\nbatch_size = 32\nsynthetic = 32\nlatent = 20\n").unwrap();
    let out = dir.path().join("run");
    ok(&["train", "--config", s(&file), "--epochs", "2", "--out", s(&out)]);
    assert_eq!(rows(&out.join("history.csv")).len(), 2);
    let cfg = resolved(&out);
    assert_eq!(cfg.get("epochs"), Some("2"));
    assert_eq!(cfg.get("latent"), Some("20"));
    assert_eq!(cfg.get("batch_size"), Some("32"));
    assert_eq!(load_checkpoint(out.join("checkpoint.bin")).unwrap().spec.latent_len(), 20);

    std::fs::write(&file, "colour = blue\n").unwrap();
    assert_eq!(code(&["train", "--config", s(&file), "--synthetic", "32", "--out", s(&out)]), 2);
}

#[test]
fn train_writes_history_samples_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path(), "run", &["--sample-every", "1"]);
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().next(), Some(pcvae::training::HISTORY_HEADER));
    assert_eq!(history.lines().count(), 3);
    for f in ["reference.ppm", "reference.wav", "epoch-0001.ppm", "epoch-0001.wav", "epoch-0002.ppm", "epoch-0002.wav"] {
        assert!(out.join("samples").join(f).is_file(), "{f}");
    }
    let state = load_checkpoint(out.join("checkpoint.bin")).unwrap();
    assert_eq!(state.epochs_done, 2);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_run(dir.path(), "a", &["--seed", "4"]);
    let b = small_run(dir.path(), "b", &["--seed", "4"]);
    let c = small_run(dir.path(), "c", &["--seed", "5"]);
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    for f in ["checkpoint.bin", "history.csv", "samples/epoch-0002.ppm", "samples/epoch-0002.wav"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    assert_ne!(read(&a, "checkpoint.bin"), read(&c, "checkpoint.bin"));
}

#[test]
fn resume_continues_the_history() {
    let dir = tempfile::tempdir().unwrap();
    let first = small_run(dir.path(), "first", &[]);
    let ckpt = first.join("checkpoint.bin");
    let more = dir.path().join("more");
    ok(&["train", "--resume", s(&ckpt), "--synthetic", "32", "--epochs", "1", "--out", s(&more)]);
    assert_eq!(rows(&more.join("history.csv")).len(), 3);
    assert_eq!(load_checkpoint(more.join("checkpoint.bin")).unwrap().epochs_done, 3);
    let clash = ["train", "--resume", s(&ckpt), "--synthetic", "32", "--preset", "desk", "--out", s(&more)];
    assert_eq!(code(&clash), 2);
}

#[test]
fn generate_draws_count_outputs_per_input() {
    let dir = tempfile::tempdir().unwrap();
    let run = small_run(dir.path(), "run", &[]);
    let ckpt = run.join("checkpoint.bin");
    let wav = run.join("samples/reference.wav");
    let ppm = run.join("samples/reference.ppm");
    let gen = dir.path().join("gen");
    ok(&["generate", "--checkpoint", s(&ckpt), "--from", "both", "--in", s(&ppm), "--in", s(&wav), "--count", "3", "--out", s(&gen)]);
    for d in 0..3 {
        assert!(gen.join(format!("gen-000-{d:03}.ppm")).is_file());
        assert!(gen.join(format!("gen-000-{d:03}.wav")).is_file());
    }
    assert!(gen.join("config.resolved").is_file());
    // a joint model needs both inputs
    assert_eq!(code(&["generate", "--checkpoint", s(&ckpt), "--from", "audio", "--in", s(&wav), "--out", s(&gen)]), 2);

    let audio_only = small_run(dir.path(), "audio-only", &["--mode", "audio-only"]);
    let ckpt = audio_only.join("checkpoint.bin");
    let from_audio = dir.path().join("from-audio");
    ok(&["generate", "--checkpoint", s(&ckpt), "--from", "audio", "--in", s(&wav), "--count", "2", "--out", s(&from_audio)]);
    let mut names: Vec<String> =
        std::fs::read_dir(&from_audio).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["config.resolved", "gen-000-000.ppm", "gen-000-001.ppm"]);
    assert_eq!(code(&["generate", "--checkpoint", s(&ckpt), "--from", "image", "--in", s(&ppm), "--out", s(&from_audio)]), 2);
}

#[test]
fn eval_reports_each_split() {
    let dir = tempfile::tempdir().unwrap();
    let run = small_run(dir.path(), "run", &["--synthetic-val", "30"]);
    let ckpt = run.join("checkpoint.bin");
    let ev = dir.path().join("eval");
    let stdout = ok(&["eval", "--checkpoint", s(&ckpt), "--synthetic", "32", "--synthetic-val", "30", "--out", s(&ev)]);
    let text = std::fs::read_to_string(ev.join("metrics.csv")).unwrap();
    assert_eq!(stdout.trim(), text.trim());
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 8);
    let table: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(table.iter().map(|r| r[0]).collect::<Vec<_>>(), ["train", "val"]);
    assert_eq!(table[0][1], "32");
    assert_eq!(table[1][1], "30");
    for r in &table {
        assert_eq!(r.len(), 8);
        assert!(r[2..].iter().all(|v| v.parse::<f64>().is_ok()), "{r:?}");
    }

    let quiet = dir.path().join("quiet");
    ok(&["eval", "--checkpoint", s(&ckpt), "--synthetic", "32", "--split", "train", "--ii", "off", "--out", s(&quiet)]);
    let row = rows(&quiet.join("metrics.csv"));
    assert_eq!(row.len(), 1);
    assert!(row[0].ends_with(",,"), "{}", row[0]);
    assert_eq!(code(&["eval", "--checkpoint", s(&ckpt), "--synthetic", "32", "--split", "val", "--out", s(&quiet)]), 2);
}

#[test]
fn trains_from_a_dataset_directory() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_dataset(&synth_split(30, 4, 8, 8, 64, 2).unwrap(), &data).unwrap();
    let out = dir.path().join("run");
    ok(&["train", "--data", s(&data), "--epochs", "1", "--batch", "30", "--out", s(&out)]);
    assert_eq!(resolved(&out).get("data"), Some(s(&data)));
    let ev = dir.path().join("eval");
    ok(&["eval", "--checkpoint", s(&out.join("checkpoint.bin")), "--data", s(&data), "--split", "val", "--out", s(&ev)]);
    assert!(rows(&ev.join("metrics.csv"))[0].starts_with("val,4,"));
}

#[test]
fn paper_visual_preset_resolves_at_full_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("paper");
    ok(&["train", "--preset", "paper-visual", "--latent", "300", "--synthetic", "27", "--epochs", "1", "--batch", "27", "--out", s(&out)]);
    let state = load_checkpoint(out.join("checkpoint.bin")).unwrap();
    assert_eq!(state.spec.mode, InputMode::Joint);
    assert_eq!((state.spec.visual_code, state.spec.audio_code), (150, 150));
    assert_eq!(state.decoders.len(), 1);
    assert_eq!(state.decoders[0].config.output.len(), 32 * 32 * 3);
    let cfg = resolved(&out);
    assert_eq!(cfg.get("preset"), Some("paper-visual"));
    assert_eq!(cfg.get("latent"), Some("300"));
    let img = pcvae::data_io::load_ppm(out.join("samples/epoch-0001.ppm")).unwrap();
    assert_eq!((img.height(), img.width()), (32, 32));
}

#[test]
fn pid_reads_a_joint_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("and.txt");
    std::fs::write(&file, "# y = x1 AND x2\ncards 2 2 2\n0 0 0 0.25\n0 1 0 0.25\n1 0 0 0.25\n1 1 1 0.25\n").unwrap();
    let stdout = ok(&["pid", "--joint", s(&file)]);
    // I(X1,X2;Y) = H(Y) = h(1/4); I(X1;Y) = I(X2;Y) = h(1/4) - 1/2
    let h = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
    let want = h - 2.0 * (h - 0.5);
    assert!(stdout.contains(&format!("{want:+.6} bits")), "{stdout}");
    assert_eq!(code(&["pid", "--joint", s(&file), "--case", "xor"]), 2);
}
