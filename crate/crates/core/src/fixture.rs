//! Synthetic dated corpus with planted themes, a temporal burst, entity
//! annotations and theme-clustered embeddings.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, TimeBins};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

struct Theme {
    name: &'static str,
    core: &'static [&'static str],
    subthemes: [&'static [&'static str]; 3],
    entities: &'static [&'static str],
}

const THEMES: [Theme; 4] = [
    Theme {
        name: "nuclear",
        core: &[
            "reactor", "nuclear", "uranium", "radiation", "atomic", "fission", "isotope", "plutonium", "coolant",
            "reactors", "enrichment", "radioactive",
        ],
        subthemes: [
            &["meltdown", "evacuation", "contamination", "leak", "fallout", "emergency"],
            &["warhead", "bomb", "arsenal", "testing", "missile", "disarmament"],
            &["electricity", "grid", "utility", "megawatt", "generator", "turbine"],
        ],
        entities: &["Chernobyl", "Three Mile Island", "IAEA", "Euratom", "Soviet Union"],
    },
    Theme {
        name: "space",
        core: &[
            "rocket", "orbit", "astronaut", "satellite", "spacecraft", "lunar", "capsule", "payload", "cosmonaut",
            "astronauts", "orbital", "liftoff",
        ],
        subthemes: [
            &["moon", "apollo", "crater", "lander", "touchdown", "regolith"],
            &["docking", "crew", "spacewalk", "laboratory", "airlock", "microgravity"],
            &["mars", "jupiter", "probe", "rover", "planetary", "flyby"],
        ],
        entities: &["NASA", "Soyuz", "ESA", "Cape Canaveral", "Baikonur"],
    },
    Theme {
        name: "agriculture",
        core: &[
            "harvest", "farmers", "crops", "wheat", "cattle", "soil", "fertilizer", "irrigation", "grain", "orchard",
            "tractor", "farmland",
        ],
        subthemes: [
            &["drought", "frost", "rainfall", "hail", "flooding", "sowing"],
            &["prices", "subsidy", "export", "cooperative", "quota", "tariffs"],
            &["herd", "pasture", "veterinary", "sheep", "milk", "breeding"],
        ],
        entities: &["FAO", "European Community", "Common Agricultural Policy", "Emmental", "Bern"],
    },
    Theme {
        name: "computing",
        core: &[
            "computer", "software", "internet", "digital", "online", "website", "email", "browser", "modem",
            "server", "database", "computers",
        ],
        subthemes: [
            &["processor", "chip", "memory", "laptop", "keyboard", "silicon"],
            &["homepage", "provider", "download", "domain", "hyperlink", "portal"],
            &["virus", "hacker", "encryption", "password", "firewall", "breach"],
        ],
        entities: &["Microsoft", "IBM", "Apple", "World Wide Web", "CERN"],
    },
];

const BACKGROUND: &[&str] = &[
    "government", "council", "report", "citizens", "city", "region", "committee", "week", "local", "official",
    "public", "meeting", "president", "national", "country", "minister", "plans", "program", "support", "experts",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureParams {
    pub n_docs: usize,
    pub seed: u64,
    pub years: [i32; 2],
    /// Theme whose documents concentrate in `burst_bin`.
    pub burst_theme: usize,
    pub burst_bin: usize,
    /// Share of burst-theme documents dated inside the burst bin.
    pub burst_share: f64,
    pub embedding_dim: usize,
    pub entity_coverage: f64,
    pub unknown_entity_uids: usize,
}

impl Default for FixtureParams {
    fn default() -> Self {
        FixtureParams {
            n_docs: 500,
            seed: 20240601,
            years: [1955, 2018],
            burst_theme: 3,
            burst_bin: 2,
            burst_share: 0.85,
            embedding_dim: 64,
            entity_coverage: 0.85,
            unknown_entity_uids: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeInfo {
    pub name: String,
    pub words: Vec<String>,
    pub subthemes: Vec<Vec<String>>,
    pub entities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub params: FixtureParams,
    pub n_docs: usize,
    pub year_histogram: BTreeMap<i32, usize>,
    pub bins: TimeBins,
    pub bin_sizes: Vec<usize>,
    pub themes: Vec<ThemeInfo>,
    /// uid -> (theme, subtheme).
    pub doc_themes: BTreeMap<String, [usize; 2]>,
    /// Share of corpus documents carrying at least one entity.
    pub entity_coverage: f64,
    pub unknown_entity_uids: usize,
}

#[derive(Debug, Clone)]
pub struct MiniCorpus {
    pub docs: Vec<Document>,
    /// `(uid, entities)` annotation records, unknown uids included.
    pub entities: Vec<(String, Vec<String>)>,
    pub embeddings: EmbeddingMatrix,
    pub manifest: FixtureManifest,
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words[rng.random_range(0..words.len())]
}

fn document_text(rng: &mut ChaCha8Rng, theme: &Theme, sub: usize) -> String {
    let len = rng.random_range(40..=90);
    let mut out = String::new();
    let mut in_sentence = 0;
    let mut sentence_len = rng.random_range(6..=14);
    for _ in 0..len {
        let u: f64 = rng.random();
        let w = if u < 0.5 {
            pick(rng, theme.core)
        } else if u < 0.8 {
            pick(rng, theme.subthemes[sub])
        } else {
            pick(rng, BACKGROUND)
        };
        if in_sentence == 0 {
            if !out.is_empty() {
                out.push(' ');
            }
            let mut c = w.chars();
            let first = c.next().unwrap().to_ascii_uppercase();
            out.push(first);
            out.push_str(c.as_str());
        } else {
            out.push(' ');
            if rng.random::<f64>() < 0.03 {
                out.push_str("& ");
            }
            out.push_str(w);
        }
        in_sentence += 1;
        if in_sentence == sentence_len {
            out.push('.');
            in_sentence = 0;
            sentence_len = rng.random_range(6..=14);
        }
    }
    if in_sentence > 0 {
        out.push('.');
    }
    out
}

pub fn generate(params: &FixtureParams) -> Result<MiniCorpus> {
    if params.n_docs < THEMES.len() * 3 {
        return Err(Error::Parameter(format!("at least {} documents are needed", THEMES.len() * 3)));
    }
    if params.burst_theme >= THEMES.len() {
        return Err(Error::Parameter(format!("burst theme {} does not exist", params.burst_theme)));
    }
    let bins = TimeBins::default_periods();
    if params.burst_bin >= bins.len() {
        return Err(Error::Parameter(format!("burst bin {} does not exist", params.burst_bin)));
    }
    if params.embedding_dim < 2 {
        return Err(Error::Parameter("embedding dimension must be >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let [y0, y1] = params.years;
    let [b0, b1] = bins.bounds()[params.burst_bin];

    let mut plan: Vec<(usize, usize)> = (0..params.n_docs)
        .map(|i| (i % THEMES.len(), (i / THEMES.len()) % 3))
        .collect();
    plan.shuffle(&mut rng);

    let mut docs = Vec::with_capacity(params.n_docs);
    let mut doc_themes = BTreeMap::new();
    for (i, &(t, s)) in plan.iter().enumerate() {
        let uid = format!("doc-{:04}", i + 1);
        let year = if t == params.burst_theme && rng.random::<f64>() < params.burst_share {
            rng.random_range(b0.max(y0)..=b1.min(y1))
        } else {
            rng.random_range(y0..=y1)
        };
        let text = document_text(&mut rng, &THEMES[t], s);
        doc_themes.insert(uid.clone(), [t, s]);
        docs.push(Document { uid, text, year });
    }

    let mut entities = Vec::new();
    let mut annotated = 0usize;
    for (d, &(t, _)) in docs.iter().zip(&plan) {
        if rng.random::<f64>() >= params.entity_coverage {
            continue;
        }
        let n = rng.random_range(1..=3);
        let mut ents: Vec<String> = THEMES[t]
            .entities
            .choose_multiple(&mut rng, n)
            .map(|e| e.to_string())
            .collect();
        if rng.random::<f64>() < 0.2 {
            let other = (t + rng.random_range(1..THEMES.len())) % THEMES.len();
            ents.push(pick(&mut rng, THEMES[other].entities).to_string());
        }
        annotated += 1;
        entities.push((d.uid.clone(), ents));
    }
    for i in 0..params.unknown_entity_uids {
        entities.push((format!("ghost-{}", i + 1), vec![pick(&mut rng, THEMES[i % THEMES.len()].entities).to_string()]));
    }

    let dim = params.embedding_dim;
    let unit = Normal::new(0.0, 1.0).unwrap();
    let centers: Vec<Vec<f64>> = (0..THEMES.len())
        .map(|_| (0..dim).map(|_| unit.sample(&mut rng)).collect())
        .collect();
    let offsets: Vec<Vec<Vec<f64>>> = (0..THEMES.len())
        .map(|_| {
            (0..3)
                .map(|_| (0..dim).map(|_| 0.5 * unit.sample(&mut rng)).collect())
                .collect()
        })
        .collect();
    let rows: Vec<Vec<f64>> = plan
        .iter()
        .map(|&(t, s)| {
            let mut v: Vec<f64> = (0..dim)
                .map(|j| centers[t][j] + offsets[t][s][j] + 0.35 * unit.sample(&mut rng))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            v
        })
        .collect();
    let embeddings = EmbeddingMatrix::from_rows(docs.iter().map(|d| d.uid.clone()).collect(), &rows)?;

    let mut year_histogram = BTreeMap::new();
    let mut bin_sizes = vec![0; bins.len()];
    for d in &docs {
        *year_histogram.entry(d.year).or_insert(0) += 1;
        if let Some(b) = bins.bin_of(d.year) {
            bin_sizes[b] += 1;
        }
    }
    let strings = |w: &[&str]| w.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let manifest = FixtureManifest {
        params: params.clone(),
        n_docs: docs.len(),
        year_histogram,
        bins,
        bin_sizes,
        themes: THEMES
            .iter()
            .map(|t| ThemeInfo {
                name: t.name.to_string(),
                words: strings(t.core),
                subthemes: t.subthemes.iter().map(|s| strings(s)).collect(),
                entities: strings(t.entities),
            })
            .collect(),
        doc_themes,
        entity_coverage: annotated as f64 / docs.len() as f64,
        unknown_entity_uids: params.unknown_entity_uids,
    };
    Ok(MiniCorpus {
        docs,
        entities,
        embeddings,
        manifest,
    })
}

const FIXTURE_CONFIG: &str = r#"# Mini-corpus pipeline configuration.
seed = 7
output_dir = "out"

[corpus]
path = "corpus.jsonl"
entities = "entities.jsonl"
min_tokens = 20
min_df = 3
max_df_ratio = 0.95

[time]
bins = [[1955, 1970], [1971, 1986], [1987, 2002], [2003, 2018]]
per_bin = true

[embeddings]
source = "hash"
dim = 128

[models]
enabled = ["lda", "cluster"]
topic_counts = [10, 20]

[cluster]
n_neighbors = 15
n_components = 5
min_dist = 0.0
min_cluster_size = 15
selection = "eom"

[hpo]
max_evals = 20
"#;

/// Writes corpus.jsonl, entities.jsonl, embeddings.bin with its index,
/// manifest.json and config.toml into `dir`.
pub fn write_fixture(dir: &Path, corpus: &MiniCorpus) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let jsonl = |name: &str, lines: Vec<String>| -> Result<()> {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        for l in lines {
            writeln!(f, "{l}").map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    };
    let ser = |v: serde_json::Value| v.to_string();
    jsonl(
        "corpus.jsonl",
        corpus
            .docs
            .iter()
            .map(|d| serde_json::to_string(d).expect("document serializes"))
            .collect(),
    )?;
    jsonl(
        "entities.jsonl",
        corpus
            .entities
            .iter()
            .map(|(u, e)| ser(serde_json::json!({"uid": u, "entities": e})))
            .collect(),
    )?;
    corpus
        .embeddings
        .write(&dir.join("embeddings.bin"), &dir.join("embeddings.index.jsonl"))?;
    let manifest = serde_json::to_string_pretty(&corpus.manifest).map_err(|e| Error::Format(e.to_string()))?;
    let path = dir.join("manifest.json");
    fs::write(&path, manifest + "\n").map_err(|e| Error::io(&path, e))?;
    let path = dir.join("config.toml");
    fs::write(&path, FIXTURE_CONFIG).map_err(|e| Error::io(&path, e))
}
