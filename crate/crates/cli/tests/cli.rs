mod common;

use common::*;

#[test]
fn harvest_then_warm_cache() {
    let base = spawn_arxiv(6);
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let out = dir.path().join("h1");
    let o = harvest(&base, &out, &cache);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["outcome"]["papers"], 6);
    assert_eq!(m["outcome"]["downloads"], 6);
    assert_eq!(jsonl_lines(&cache.join("metadata.jsonl")).len(), 6);
    for (i, topic) in TOPICS.iter().enumerate().take(6) {
        let txt = std::fs::read_to_string(cache.join(format!("{}.txt", paper_id(i)))).unwrap();
        assert!(txt.contains(topic), "{txt}");
    }

    let out2 = dir.path().join("h2");
    let o = harvest(&base, &out2, &cache);
    assert!(o.status.success());
    assert_eq!(manifest(&out2)["outcome"]["downloads"], 0);
}

#[test]
fn classify_is_resumable_and_analyze_deterministic() {
    let base = spawn_arxiv(5);
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    assert!(harvest(&base, &dir.path().join("h"), &cache).status.success());
    let dataset = dir.path().join("d.jsonl");

    let classify = |out: &str| {
        run(&[
            "--out",
            p(&dir.path().join(out)),
            "classify",
            "--dataset",
            p(&dataset),
            "--in",
            p(&cache),
            "--provider",
            "mock",
        ])
    };
    assert!(classify("c1").status.success());
    assert_eq!(jsonl_lines(&dataset).len(), 5);
    let before = std::fs::read(&dataset).unwrap();
    assert!(classify("c2").status.success());
    assert_eq!(std::fs::read(&dataset).unwrap(), before);
    let m = manifest(&dir.path().join("c2"));
    assert_eq!(m["outcome"]["already_present"], 5);
    assert_eq!(m["outcome"]["batch"]["completed"], 0);
    assert_eq!(m["taxonomy_digest"].as_str().unwrap().len(), 64);
    let digest = m["prompt_digest"].as_str().unwrap();
    assert!(jsonl_lines(&dataset).iter().all(|r| r["prompt_digest"] == digest));

    let analyze = |out: &str| {
        let o = run(&["--out", p(&dir.path().join(out)), "analyze", "--dataset", p(&dataset)]);
        assert!(o.status.success());
    };
    analyze("a1");
    analyze("a2");
    for f in [
        "fig3_counts.csv",
        "fig4_ratios.csv",
        "fig5_distribution.csv",
        "fig6_disparity.csv",
        "fig7_motivated.csv",
        "summary.json",
    ] {
        let a = std::fs::read(dir.path().join("a1").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("a2").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between runs");
    }

    let o = run(&[
        "--out",
        p(&dir.path().join("f")),
        "footprint",
        "--dataset",
        p(&dataset),
        "--as-model",
        "DeepSeek-V3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&dir.path().join("f"))["outcome"]["calls"], 5);
}

#[test]
fn assess_prints_canonical_block() {
    let dir = tempfile::tempdir().unwrap();
    let paper = dir.path().join("paper.txt");
    std::fs::write(&paper, "A robot arm\nIntroduction\nRobots in precision agriculture.\n").unwrap();
    let o = run(&["--out", p(&dir.path().join("o")), "assess", "--file", p(&paper), "--provider", "mock"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("0. Paper type:"));
    assert!(stdout.contains("SDG 2"));
    let parsed = sdgmine::respparse::parse_response(&stdout).unwrap();
    assert!(parsed.aligned.sdgs.iter().any(|s| s.get() == 2));
}

#[test]
fn footprint_from_hypothetical_calls() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "--out",
        p(&out),
        "footprint",
        "--calls",
        "DeepSeek-V3=600,Qwen3-32B=600,gpt-oss-20b=600,Llama-3.1-70B=600",
        "--worst-case",
        "Qwen3-32B,gpt-oss-20b",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("footprint.json")).unwrap()).unwrap();
    let kwh = report["total_energy_kwh"].as_f64().unwrap();
    let kg = report["total_co2e_kg"].as_f64().unwrap();
    // 600 x 13.162 Wh + 1800 x 19.183 Wh
    assert!((kwh - 42.4266).abs() < 1e-9, "{kwh}");
    assert!((kg - 21.853_392_6).abs() < 1e-9, "{kg}");
    assert!(String::from_utf8_lossy(&o.stdout).contains("Total Carbon Footprint"));
}

#[test]
fn categorized_exit_codes_and_manifest_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["--out", p(&out), "analyze", "--dataset", p(&dir.path().join("none.jsonl"))]);
    assert_eq!(o.status.code(), Some(3));
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");
    assert_eq!(m["error_category"], "input");

    let o = run(&["analyze", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["--out", p(&out), "footprint", "--calls", "nobody=3"]);
    assert_eq!(o.status.code(), Some(3));

    let o = run(&["--out", p(&out), "classify", "--dataset", "d.jsonl", "--in", p(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(3));

    let o = run(&["--out", p(&out), "consistency", "--runs", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_sets_provider() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "max_input_tokens = 5000\nmalformed_policy = \"retry:1\"\n[provider]\nmodel_id = \"from-config\"\nbackoff_base = 1\n",
    )
    .unwrap();
    let paper = dir.path().join("2403.00001.txt");
    std::fs::write(&paper, "Title\nIntroduction\nHospital robots for health.\n").unwrap();
    let out = dir.path().join("o");
    let o = run(&["--config", p(&cfg), "--out", p(&out), "assess", "--file", p(&paper)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["provider"]["config"]["model_id"], "from-config");
    assert_eq!(m["config"]["provider"]["max_input_tokens"], 5000);
    assert_eq!(m["config"]["provider"]["kind"], "mock");

    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let o = run(&["--config", p(&cfg), "--out", p(&out), "assess", "--file", p(&paper)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn consistency_and_benchmark_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let paper = dir.path().join("2411.15159.txt");
    std::fs::write(
        &paper,
        "Bee foraging\nIntroduction\nClimate change threatens forest biodiversity; we target sustainability.\n",
    )
    .unwrap();
    let out = dir.path().join("c");
    let o = run(&["--out", p(&out), "consistency", "--file", p(&paper), "--runs", "12", "--mock-drop", "0.3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(jsonl_lines(&out.join("2411.15159.runs.jsonl")).len(), 12);
    assert!(out.join("stability.csv").exists());
    // a second invocation reuses the stored runs
    let o = run(&["--out", p(&out), "consistency", "--file", p(&paper), "--runs", "12", "--mock-drop", "0.3"]);
    assert!(o.status.success());
    assert_eq!(jsonl_lines(&out.join("2411.15159.runs.jsonl")).len(), 12);

    let texts = dir.path().join("texts");
    std::fs::create_dir(&texts).unwrap();
    for (i, topic) in TOPICS.iter().enumerate().take(4) {
        std::fs::write(
            texts.join(format!("2402.0000{i}.txt")),
            format!("T{i}\nIntroduction\n{topic}\n"),
        )
        .unwrap();
    }
    let bench = dir.path().join("b");
    let o = run(&["--out", p(&bench), "benchmark", "--models", "m1,m2", "--in", p(&texts)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(bench.join("ensemble.json")).unwrap()).unwrap();
    assert_eq!(report["paper_ids"].as_array().unwrap().len(), 4);
    let csv = std::fs::read_to_string(bench.join("ensemble.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0.000000,0.000000")));
}
