use std::path::Path;

use serde_json::{json, Value};

use shared_lasso::corpus::{self, Grouping, Vocabulary};
use shared_lasso::datadir::{self, DataDir};
use shared_lasso::denoise::{self, Shrinkable};
use shared_lasso::dsl::{self, DslFit, GroupPredictor, GroupedDataset, SeparateFits, WeightScheme};
use shared_lasso::lasso::{LassoFit, LassoOptions};
use shared_lasso::resampling::{self, BootstrapConfig, ReducedFeatureSet, StabilityCounts};
use shared_lasso::subgroups::{self, RemovalMode};
use shared_lasso::{Error, Result};

use crate::output::{self, in_dir, Manifest};
use crate::{
    BootstrapArgs, BootstrapMode, Cli, Command, DenoiseArgs, FeaturizeArgs, FitArgs, Model,
    RemovalArg, ReportArgs, SubgroupArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Featurize(a) => featurize(cli, a),
        Command::Fit(a) => fit(cli, a),
        Command::Bootstrap(a) => bootstrap(cli, a),
        Command::Denoise(a) => denoise(cli, a),
        Command::Subgroups(a) => subgroups(cli, a),
        Command::Report(a) => report(cli, a),
    }
}

fn featurize(cli: &Cli, a: &FeaturizeArgs) -> Result<()> {
    if a.grouped && a.genres.is_none() {
        return Err(Error::Config(
            "--grouped needs a genre sidecar: pass --genres <TSV>".into(),
        ));
    }
    let mut reviews = corpus::ingest(&a.corpus)?;
    let mut manifest = Manifest::new();
    manifest.set("tokenizer", corpus::TOKENIZER_VERSION);
    manifest.set("reviews", reviews.len());
    if let Some(path) = &a.genres {
        let sidecar = corpus::read_genre_sidecar(path)?;
        let matched = corpus::attach_genres(&mut reviews, &sidecar);
        log::info!(
            "genre sidecar matched {matched} of {} reviews",
            reviews.len()
        );
        manifest.set("genre_matches", matched);
    }
    let grouping = if a.grouped {
        Grouping::Genres(a.genre_priority.iter().map(|g| g.to_lowercase()).collect())
    } else {
        Grouping::Single("all".into())
    };
    let prepared = corpus::group_and_split(&reviews, &grouping, cli.seed, a.min_doc_freq)?;
    log::info!(
        "n = {} training rows, p = {} features, groups {:?}",
        prepared.train.n_rows(),
        prepared.vocab.len(),
        prepared.train.group_sizes()
    );
    let ids = |labels: &[corpus::RowLabel]| -> Vec<String> {
        labels.iter().map(|l| l.key.clone()).collect()
    };
    datadir::write(
        &a.out,
        (&prepared.train, &ids(&prepared.train_labels)),
        (&prepared.test, &ids(&prepared.test_labels)),
        Some(&prepared.vocab),
    )?;
    for f in [
        "train.design",
        "test.design",
        "train_labels.csv",
        "test_labels.csv",
        "groups.txt",
        "vocab.tsv",
    ] {
        manifest.output(&in_dir(&a.out, f), &a.out);
    }
    manifest.set("n_train", prepared.train.n_rows());
    manifest.set("n_test", prepared.test.n_rows());
    manifest.set("p", prepared.vocab.len());
    manifest.set("group_sizes", prepared.train.group_sizes());
    manifest.write(cli, &a.out)
}

/// Expands `all` to `all_schemes` and parses the rest.
fn parse_schemes(specs: &[String], all_schemes: &[WeightScheme]) -> Result<Vec<WeightScheme>> {
    let mut out = Vec::new();
    for s in specs {
        if s == "all" {
            out.extend(all_schemes.iter().cloned());
        } else {
            out.push(s.parse()?);
        }
    }
    Ok(out)
}

fn fit_document(model: Model, value: Value) -> Value {
    match model {
        Model::Pooled => json!({"model": "pooled", "fit": value}),
        Model::Separate => json!({"model": "separate", "fits": value}),
        Model::Dsl => json!({"model": "dsl", "fit": value}),
    }
}

fn separate_json(fits: &SeparateFits, groups: &[String]) -> Value {
    groups
        .iter()
        .zip(&fits.0)
        .map(|(g, f)| json!({"group": g, "fit": f.to_json()}))
        .collect()
}

fn fit(cli: &Cli, a: &FitArgs) -> Result<()> {
    let data = datadir::read(&a.data)?;
    let opts = a.solver.options();
    opts.validate()?;
    output::create_dir(&a.out)?;
    let groups = data.train.group_names().to_vec();
    let mut manifest = Manifest::new();
    let mut csv = output::mse_header(&groups);
    match a.model {
        Model::Pooled => {
            let f = dsl::fit_pooled(&data.train, &opts, cli.seed)?;
            let t = dsl::evaluate(&f, &data.test)?;
            csv.push_str(&output::mse_row("pooled", "none", &t));
            let path = in_dir(&a.out, "fit_pooled.json");
            output::write_json(&path, &fit_document(Model::Pooled, f.to_json()))?;
            manifest.output(&path, &a.out);
            manifest.set("lambda", f.lambda);
        }
        Model::Separate => {
            let f = dsl::fit_separate(&data.train, &opts, cli.seed)?;
            let t = dsl::evaluate(&f, &data.test)?;
            csv.push_str(&output::mse_row("separate", "none", &t));
            let path = in_dir(&a.out, "fit_separate.json");
            output::write_json(
                &path,
                &fit_document(Model::Separate, separate_json(&f, &groups)),
            )?;
            manifest.output(&path, &a.out);
        }
        Model::Dsl => {
            let schemes = parse_schemes(&a.weights, &WeightScheme::BUILT_IN)?;
            for scheme in &schemes {
                let f = dsl::fit_dsl(&data.train, scheme, &opts, cli.seed)?;
                let t = dsl::evaluate(&f, &data.test)?;
                csv.push_str(&output::mse_row("dsl", &scheme.name(), &t));
                let path = in_dir(&a.out, &format!("fit_dsl_{}.json", file_stem(scheme)));
                output::write_json(&path, &fit_document(Model::Dsl, f.to_json()))?;
                manifest.output(&path, &a.out);
            }
        }
    }
    let path = in_dir(&a.out, "mse.csv");
    output::write_text(&path, &csv)?;
    manifest.output(&path, &a.out);
    print!("{csv}");
    manifest.write(cli, &a.out)
}

fn file_stem(scheme: &WeightScheme) -> String {
    match scheme {
        WeightScheme::Custom(_) => "custom".into(),
        s => s.name(),
    }
}

fn token_of(data: &DataDir, feature: usize) -> String {
    data.token(feature)
}

fn stability_tsv(counts: &StabilityCounts, label: impl Fn(usize) -> String) -> String {
    let mut out = String::from("feature_id\ttoken\tcount\tproportion\n");
    for r in resampling::stability_report(counts) {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.feature,
            label(r.feature),
            r.count,
            r.proportion
        ));
    }
    out
}

fn union_text(set: &ReducedFeatureSet) -> String {
    set.features.iter().map(|j| format!("{j}\n")).collect()
}

fn reduced_vocab(vocab: &Vocabulary, set: &ReducedFeatureSet) -> Result<Vocabulary> {
    let tokens = set
        .features
        .iter()
        .map(|&j| vocab.token(j).to_string())
        .collect();
    let freqs = set.features.iter().map(|&j| vocab.doc_freq(j)).collect();
    Vocabulary::from_parts(tokens, freqs, vocab.min_doc_freq)
}

fn write_reduced(data: &DataDir, set: &ReducedFeatureSet, dir: &Path) -> Result<()> {
    let (train, _) = resampling::reduce_dataset(&data.train, set)?;
    let (test, _) = resampling::reduce_dataset(&data.test, set)?;
    let vocab = match &data.vocab {
        Some(v) => Some(reduced_vocab(v, set)?),
        None => None,
    };
    datadir::write(
        dir,
        (&train, &data.train_ids),
        (&test, &data.test_ids),
        vocab.as_ref(),
    )?;
    let map: String = set.features.iter().map(|j| format!("{j}\n")).collect();
    output::write_text(&dir.join("original_features.txt"), &map)
}

fn table1_row(label: &str, full: f64, reduced: f64, p_full: usize, p_reduced: usize) -> String {
    format!("{label},{full},{reduced},{p_full},{p_reduced}\n")
}

const TABLE1_HEADER: &str = "group,full_mse,reduced_mse,full_features,reduced_features\n";

fn bootstrap(cli: &Cli, a: &BootstrapArgs) -> Result<()> {
    let data = datadir::read(&a.data)?;
    let opts = a.solver.options();
    let cfg = BootstrapConfig {
        replicates: a.replicates,
        seed: cli.seed,
        solver: opts.clone(),
        resample_size: a.resample_size,
    };
    output::create_dir(&a.out)?;
    let mut manifest = Manifest::new();
    let p = data.train.n_features();
    let mut table1 = String::from(TABLE1_HEADER);

    let union = match a.mode {
        BootstrapMode::Bls => {
            let results = resampling::bootstrap_lasso_group(&data.train, &cfg)?;
            let mut failures = Vec::new();
            for r in &results {
                let stem = r.group.to_lowercase();
                let path = in_dir(&a.out, &format!("stability_{stem}.tsv"));
                output::write_text(&path, &stability_tsv(&r.counts, |j| token_of(&data, j)))?;
                manifest.output(&path, &a.out);
                let path = in_dir(&a.out, &format!("union_{stem}.txt"));
                output::write_text(&path, &union_text(&r.union))?;
                manifest.output(&path, &a.out);
                failures.push((r.group.clone(), r.counts.failures));
                log::info!(
                    "{}: union of {} replicates has {} of {p} features",
                    r.group,
                    a.replicates,
                    r.union.len()
                );
            }
            manifest.set("failures", failures);
            // Lasso per group on full data vs its own reduced feature set.
            for (g, r) in results.iter().enumerate() {
                let (full, reduced) = group_reduction_mse(&data, g + 1, &r.union, &opts, cli.seed)?;
                table1.push_str(&table1_row(&r.group, full, reduced, p, r.union.len()));
            }
            let sets: Vec<ReducedFeatureSet> = results.into_iter().map(|r| r.union).collect();
            ReducedFeatureSet::merge(&sets)
        }
        BootstrapMode::Bsls => {
            let scheme: WeightScheme = a.weights.parse()?;
            let result = resampling::bootstrap_dsl(&data.train, &scheme, &cfg)?;
            let groups = data.train.group_names();
            let label = |col: usize| {
                let (block, feature) = (col / p, col % p);
                let block_name = if block == 0 {
                    "shared"
                } else {
                    groups[block - 1].as_str()
                };
                format!("{block_name}:{}", token_of(&data, feature))
            };
            let path = in_dir(&a.out, "stability.tsv");
            output::write_text(&path, &stability_tsv(&result.counts, label))?;
            manifest.output(&path, &a.out);
            manifest.set("failures", result.counts.failures);
            manifest.set("scheme", scheme.name());
            log::info!(
                "union of {} replicates has {} of {p} features",
                a.replicates,
                result.union.len()
            );
            let (rd_train, _) = resampling::reduce_dataset(&data.train, &result.union)?;
            let (rd_test, _) = resampling::reduce_dataset(&data.test, &result.union)?;
            let full = dsl::evaluate(
                &dsl::fit_dsl(&data.train, &scheme, &opts, cli.seed)?,
                &data.test,
            )?;
            let reduced = dsl::evaluate(
                &dsl::fit_dsl(&rd_train, &scheme, &opts, cli.seed)?,
                &rd_test,
            )?;
            let q = result.union.len();
            table1.push_str(&table1_row("all", full.all, reduced.all, p, q));
            for (g, name) in groups.iter().enumerate() {
                table1.push_str(&table1_row(
                    name,
                    full.per_group[g],
                    reduced.per_group[g],
                    p,
                    q,
                ));
            }
            result.union
        }
    };

    let path = in_dir(&a.out, "union.txt");
    output::write_text(&path, &union_text(&union))?;
    manifest.output(&path, &a.out);
    let path = in_dir(&a.out, "table1.csv");
    output::write_text(&path, &table1)?;
    manifest.output(&path, &a.out);
    print!("{table1}");
    let reduced_dir = in_dir(&a.out, "reduced");
    write_reduced(&data, &union, &reduced_dir)?;
    manifest.output(&reduced_dir, &a.out);
    manifest.set("union_size", union.len());
    manifest.set("p", p);
    manifest.write(cli, &a.out)
}

/// Test MSE of a lasso on group `g` alone, with all features and with `set`.
fn group_reduction_mse(
    data: &DataDir,
    g: usize,
    set: &ReducedFeatureSet,
    opts: &LassoOptions,
    seed: u64,
) -> Result<(f64, f64)> {
    let name = &data.train.group_names()[g - 1];
    let single = |ds: &GroupedDataset| -> Result<GroupedDataset> {
        let (x, y) = ds.group_data(g)?;
        GroupedDataset::ungrouped(x, y, name)
    };
    let train = single(&data.train)?;
    let test = single(&data.test)?;
    let full = dsl::evaluate(&dsl::fit_pooled(&train, opts, seed)?, &test)?.all;
    let (rtrain, _) = resampling::reduce_dataset(&train, set)?;
    let (rtest, _) = resampling::reduce_dataset(&test, set)?;
    let reduced = dsl::evaluate(&dsl::fit_pooled(&rtrain, opts, seed)?, &rtest)?.all;
    Ok((full, reduced))
}

enum LoadedFit {
    Pooled(LassoFit),
    Separate(SeparateFits),
    Dsl(DslFit),
}

fn load_fit(path: &Path, groups: &[String]) -> Result<LoadedFit> {
    let doc = output::read_json(path)?;
    let bad = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
    match doc["model"].as_str() {
        Some("pooled") => Ok(LoadedFit::Pooled(LassoFit::from_json(doc["fit"].clone())?)),
        Some("dsl") => Ok(LoadedFit::Dsl(DslFit::from_json(doc["fit"].clone())?)),
        Some("separate") => {
            let entries = doc["fits"]
                .as_array()
                .ok_or_else(|| bad("fits must be a list"))?;
            let mut fits = Vec::new();
            for (entry, g) in entries.iter().zip(groups) {
                if entry["group"].as_str() != Some(g.as_str()) {
                    return Err(bad(&format!("expected a fit for group {g:?}")));
                }
                fits.push(LassoFit::from_json(entry["fit"].clone())?);
            }
            if fits.len() != groups.len() {
                return Err(bad("one fit per group required"));
            }
            Ok(LoadedFit::Separate(SeparateFits(fits)))
        }
        _ => Err(bad("unknown model")),
    }
}

fn sweep_with<F>(
    fit: &F,
    data: &DataDir,
    sigma: Option<f64>,
    n: usize,
) -> Result<denoise::DenoiseSweep>
where
    F: Shrinkable + GroupPredictor + Sync,
{
    let sigma = match sigma {
        Some(s) => s,
        None => denoise::residual_sigma(fit, &data.train)?,
    };
    denoise::sweep_gamma(fit, &data.test, sigma, n)
}

fn denoise(cli: &Cli, a: &DenoiseArgs) -> Result<()> {
    let data = datadir::read(&a.data)?;
    let fit = load_fit(&a.fit, data.train.group_names())?;
    let sigma = match a.sigma.as_str() {
        "auto" => None,
        s => Some(s.parse::<f64>().map_err(|_| {
            Error::Config(format!("--sigma must be `auto` or a number, got {s:?}"))
        })?),
    };
    let n = a.n.unwrap_or(data.train.n_rows());
    let sweep = match &fit {
        LoadedFit::Pooled(f) => sweep_with(f, &data, sigma, n)?,
        LoadedFit::Separate(f) => sweep_with(f, &data, sigma, n)?,
        LoadedFit::Dsl(f) => sweep_with(f, &data, sigma, n)?,
    };
    output::create_dir(&a.out)?;
    let mut manifest = Manifest::new();
    let path = in_dir(&a.out, "sweep.csv");
    output::write_text(&path, &sweep.to_csv())?;
    manifest.output(&path, &a.out);
    let path = in_dir(&a.out, "summary.json");
    output::write_json(&path, &sweep.summary_json())?;
    manifest.output(&path, &a.out);
    println!(
        "argmin gamma {} (threshold {}), test MSE {} vs {} unthresholded",
        sweep.argmin_gamma,
        denoise::donoho_threshold(n, sweep.argmin_gamma, sweep.sigma)?,
        sweep.min_mse,
        sweep.mse[0]
    );
    manifest.write(cli, &a.out)
}

fn subgroups(cli: &Cli, a: &SubgroupArgs) -> Result<()> {
    let data = datadir::read(&a.data)?;
    let opts = a.solver.options();
    opts.validate()?;
    let schemes = parse_schemes(&a.weights, &WeightScheme::REMOVAL_STUDY)?;
    let mode = match (a.zero_only, a.removal) {
        (true, _) | (_, RemovalArg::ZeroOnly) => RemovalMode::ZeroOnly,
        (_, RemovalArg::ReuseLambda) => RemovalMode::ReuseLambda,
        (_, RemovalArg::Refit) => RemovalMode::Refit,
    };
    output::create_dir(&a.out)?;
    let separate = dsl::fit_separate(&data.train, &opts, cli.seed)?;
    let groups = data.train.group_names().to_vec();
    let mut rows = Vec::new();
    let mut venn = serde_json::Map::new();
    let mut sets_doc = serde_json::Map::new();
    for scheme in &schemes {
        let base = dsl::fit_dsl(&data.train, scheme, &opts, cli.seed)?;
        let (per_group, shared) = subgroups::extract_sets(&separate, &base)?;
        let sg = subgroups::subgroups(&per_group, &shared);
        venn.insert(scheme.name(), json!(sg.venn));
        let mut named = serde_json::Map::new();
        for s in per_group
            .iter()
            .chain([&shared])
            .chain(sg.removal_sets().iter().skip(1))
        {
            named.insert(s.label.clone(), json!(s.features));
        }
        sets_doc.insert(scheme.name(), Value::Object(named));
        rows.extend(subgroups::removal_table(
            &data.train,
            &data.test,
            scheme,
            &sg,
            &base,
            &opts,
            cli.seed,
            mode,
        )?);
    }
    let mut manifest = Manifest::new();
    let csv = subgroups::removal_csv(&groups, &rows);
    let path = in_dir(&a.out, "table6.csv");
    output::write_text(&path, &csv)?;
    manifest.output(&path, &a.out);
    let path = in_dir(&a.out, "venn.json");
    output::write_json(&path, &Value::Object(venn))?;
    manifest.output(&path, &a.out);
    let path = in_dir(&a.out, "sets.json");
    output::write_json(&path, &Value::Object(sets_doc))?;
    manifest.output(&path, &a.out);
    manifest.set("removal_mode", format!("{mode:?}"));
    print!("{csv}");
    manifest.write(cli, &a.out)
}

fn report(cli: &Cli, a: &ReportArgs) -> Result<()> {
    let data = datadir::read(&a.data)?;
    let opts = a.solver.options();
    opts.validate()?;
    let chosen: WeightScheme = a.weights.parse()?;
    output::create_dir(&a.out)?;
    let groups = data.train.group_names().to_vec();
    let mut manifest = Manifest::new();

    let pooled = dsl::evaluate(&dsl::fit_pooled(&data.train, &opts, cli.seed)?, &data.test)?;
    let separate = dsl::evaluate(
        &dsl::fit_separate(&data.train, &opts, cli.seed)?,
        &data.test,
    )?;
    let mut schemes: Vec<WeightScheme> = WeightScheme::BUILT_IN.to_vec();
    if !schemes.contains(&chosen) {
        schemes.push(chosen.clone());
    }
    let mut table3 = output::mse_header(&groups);
    let mut chosen_row = None;
    for scheme in &schemes {
        let t = dsl::evaluate(
            &dsl::fit_dsl(&data.train, scheme, &opts, cli.seed)?,
            &data.test,
        )?;
        if *scheme == chosen {
            chosen_row = Some(t.clone());
        }
        if WeightScheme::BUILT_IN.contains(scheme) {
            table3.push_str(&output::mse_row("dsl", &scheme.formula(), &t));
        }
    }
    let dsl_row = chosen_row.expect("chosen scheme was fitted");
    let mut table2 = output::mse_header(&groups);
    table2.push_str(&output::mse_row("pooled", "none", &pooled));
    table2.push_str(&output::mse_row("separate", "none", &separate));
    table2.push_str(&output::mse_row("dsl", &chosen.name(), &dsl_row));

    for (name, text) in [("table2.csv", &table2), ("table3.csv", &table3)] {
        let path = in_dir(&a.out, name);
        output::write_text(&path, text)?;
        manifest.output(&path, &a.out);
    }
    println!("{table2}\n{table3}");
    manifest.set("n_train", data.train.n_rows());
    manifest.set("p", data.train.n_features());
    manifest.write(cli, &a.out)
}
