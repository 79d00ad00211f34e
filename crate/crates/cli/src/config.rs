//! Flat `key = value` configuration with command-line overrides.
//!
//! Every key is declared once in [`KEYS`] with its type, default and the commands
//! it applies to. A config file may only use keys of the command being run; every
//! key also has a `--kebab-case` flag, and flags win over the file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches};
use rhgnn_core::layers::{Ablation, ModelConfig};
use rhgnn_core::training::TrainConfig;

use crate::error::{config_err, io_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Command {
    GenSynth,
    TrainClassify,
    TrainLinkpred,
    Cluster,
    Embed,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::GenSynth,
        Command::TrainClassify,
        Command::TrainLinkpred,
        Command::Cluster,
        Command::Embed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::GenSynth => "gen-synth",
            Command::TrainClassify => "train-classify",
            Command::TrainLinkpred => "train-linkpred",
            Command::Cluster => "cluster",
            Command::Embed => "embed",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }

    fn about(self) -> &'static str {
        match self {
            Command::GenSynth => "Generate a synthetic labeled heterogeneous graph",
            Command::TrainClassify => "Train and evaluate node classification",
            Command::TrainLinkpred => "Train and evaluate link prediction on one relation",
            Command::Cluster => "Cluster embeddings of labeled nodes with k-means and score NMI/ARI",
            Command::Embed => "Write node embeddings and mean relation fusing weights",
        }
    }

    fn bit(self) -> u8 {
        1 << self as u8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    Bool,
    Text,
    /// Input file that must exist.
    Input,
    /// Output directory.
    Output,
    /// Comma-separated positive integers.
    Ints,
    /// Comma-separated floats.
    Floats,
}

#[derive(Debug)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    /// `None` marks a key without default: required when `required`, else unset.
    pub default: Option<&'static str>,
    pub required: bool,
    commands: u8,
    pub help: &'static str,
}

const G: u8 = 1 << Command::GenSynth as u8;
const C: u8 = 1 << Command::TrainClassify as u8;
const L: u8 = 1 << Command::TrainLinkpred as u8;
const K: u8 = 1 << Command::Cluster as u8;
const E: u8 = 1 << Command::Embed as u8;
const TRAIN: u8 = C | L;
const ALL: u8 = G | C | L | K | E;

const fn key(name: &'static str, kind: Kind, default: Option<&'static str>, commands: u8, help: &'static str) -> KeySpec {
    KeySpec {
        name,
        kind,
        default,
        required: false,
        commands,
        help,
    }
}

const fn required(name: &'static str, kind: Kind, commands: u8, help: &'static str) -> KeySpec {
    KeySpec {
        name,
        kind,
        default: None,
        required: true,
        commands,
        help,
    }
}

pub static KEYS: &[KeySpec] = &[
    required("out", Kind::Output, ALL, "output directory (created by renaming a staging directory)"),
    key("overwrite", Kind::Bool, Some("false"), ALL, "replace an existing output directory"),
    key("seed", Kind::Int, Some("0"), ALL, "random seed"),
    key("threads", Kind::Int, None, C | K, "worker threads; defaults to RHGNN_THREADS or the CPU count"),
    required("graph", Kind::Input, C | L | K | E, "graph file"),
    required("labels", Kind::Input, C | K, "labels file"),
    required("splits", Kind::Input, C, "splits file"),
    required("checkpoint", Kind::Input, K | E, "checkpoint written by a training command"),
    required("node_type", Kind::Text, E, "node type to embed"),
    // model
    key("layers", Kind::Int, Some("2"), TRAIN, "number of relation-aware layers"),
    key("heads", Kind::Int, Some("8"), TRAIN, "attention heads"),
    key("input_dim", Kind::Int, Some("64"), TRAIN, "width of the projected input features"),
    key("hidden_dim", Kind::Int, Some("64"), TRAIN, "node representation width"),
    key("relation_dim", Kind::Int, Some("64"), TRAIN, "relation representation width"),
    key("fuse_dim", Kind::Int, Some("64"), TRAIN, "fused representation width"),
    key("dropout", Kind::Float, Some("0.6"), TRAIN, "dropout rate"),
    key("negative_slope", Kind::Float, Some("0.2"), TRAIN, "LeakyReLU slope of attention scores"),
    key("no_wrc", Kind::Bool, Some("false"), TRAIN, "drop the weighted residual connection"),
    key("no_cmp", Kind::Bool, Some("false"), TRAIN, "skip cross-relation message passing"),
    key("no_rrf", Kind::Bool, Some("false"), TRAIN, "fuse relations by mean pooling"),
    // optimization
    key("lr", Kind::Float, Some("0.001"), TRAIN, "initial learning rate"),
    key("lr_min", Kind::Float, Some("0"), TRAIN, "learning rate at the last epoch"),
    key("epochs", Kind::Int, Some("200"), TRAIN, "maximum epochs"),
    key("patience", Kind::Int, Some("50"), TRAIN, "epochs without validation improvement before stopping"),
    key("batch_size", Kind::Int, None, TRAIN, "seeds (or positive edges) per step; unset trains full-batch"),
    key("fanouts", Kind::Ints, None, TRAIN, "sampled neighbors per relation and layer, input layer first"),
    key("full_batch", Kind::Bool, Some("false"), TRAIN, "full neighborhoods and one step per epoch"),
    key("runs", Kind::Int, Some("1"), C, "independent runs with seeds seed, seed+1, ...; metrics are means"),
    // link prediction
    required("relation", Kind::Text, L, "relation whose edges are predicted"),
    key("negatives_train", Kind::Int, Some("5"), L, "negatives per positive edge in training"),
    key("negatives_eval", Kind::Int, Some("1"), L, "negatives per positive edge in evaluation"),
    key("edge_split", Kind::Floats, Some("0.7,0.1"), L, "train and valid edge fractions; test gets the rest"),
    // clustering
    key("k", Kind::Int, None, K, "clusters; defaults to the class count"),
    key("reps", Kind::Int, Some("10"), K, "k-means repetitions averaged"),
    key("restarts", Kind::Int, Some("10"), K, "k-means++ restarts per repetition"),
    // synthetic data
    required("node_types", Kind::Text, G, "node types as name:count:dim, comma-separated"),
    required("relations", Kind::Text, G, "relations as name:src:dst:edges, comma-separated"),
    required("labeled", Kind::Text, G, "node type that carries labels"),
    key("classes", Kind::Int, Some("3"), G, "number of classes"),
    key("signal", Kind::Float, Some("0.7"), G, "fraction of feature variance tied to the class"),
    key("homophily", Kind::Float, Some("0.7"), G, "probability that an edge joins same-class nodes"),
    key("split", Kind::Text, Some("2:1:7"), G, "train:valid:test ratio of labeled nodes"),
];

fn spec_of(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

fn applies(spec: &KeySpec, command: Command) -> bool {
    spec.commands & command.bit() != 0
}

pub fn keys_for(command: Command) -> impl Iterator<Item = &'static KeySpec> {
    KEYS.iter().filter(move |k| applies(k, command))
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn normalize(spec: &KeySpec, raw: &str) -> Result<String> {
    let raw = raw.trim();
    let bad = |what: &str| config_err(format!("key `{}`: expected {what}, got `{raw}`", spec.name));
    Ok(match spec.kind {
        Kind::Int => raw.parse::<u64>().map_err(|_| bad("a non-negative integer"))?.to_string(),
        Kind::Float => {
            let x: f64 = raw.parse().map_err(|_| bad("a number"))?;
            if !x.is_finite() {
                return Err(bad("a finite number"));
            }
            raw.to_string()
        }
        Kind::Bool => raw.parse::<bool>().map_err(|_| bad("true or false"))?.to_string(),
        Kind::Text => {
            if raw.is_empty() {
                return Err(bad("a value"));
            }
            raw.to_string()
        }
        Kind::Input | Kind::Output => {
            if raw.is_empty() {
                return Err(bad("a path"));
            }
            let p = std::path::absolute(raw).map_err(io_err(raw))?;
            if spec.kind == Kind::Input && !p.exists() {
                return Err(config_err(format!("key `{}`: {} does not exist", spec.name, p.display())));
            }
            p.display().to_string()
        }
        Kind::Ints => parse_list::<usize>(raw)
            .ok_or_else(|| bad("comma-separated integers"))?
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(","),
        Kind::Floats => {
            parse_list::<f64>(raw).ok_or_else(|| bad("comma-separated numbers"))?;
            raw.split(',').map(str::trim).collect::<Vec<_>>().join(",")
        }
    })
}

fn parse_list<T: std::str::FromStr>(raw: &str) -> Option<Vec<T>> {
    raw.split(',').map(|s| s.trim().parse().ok()).collect()
}

/// Parses `key = value` lines. `#` starts a comment.
pub fn parse_config_text(text: &str, command: Command, origin: &Path) -> Result<BTreeMap<&'static str, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("{}:{}", origin.display(), i + 1);
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("{}: expected `key = value`", at())))?;
        let k = k.trim();
        let spec = spec_of(k).ok_or_else(|| config_err(format!("{}: unknown key `{k}`", at())))?;
        if !applies(spec, command) {
            return Err(config_err(format!("{}: key `{k}` does not apply to {}", at(), command.name())));
        }
        let v = normalize(spec, v).map_err(|e| config_err(format!("{}: {e}", at())))?;
        if out.insert(spec.name, v).is_some() {
            return Err(config_err(format!("{}: key `{k}` set twice", at())));
        }
    }
    Ok(out)
}

/// The clap definition of the whole program.
pub fn cli() -> clap::Command {
    let mut app = clap::Command::new("rhgnn")
        .about("Relation-aware heterogeneous graph neural networks")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for command in Command::ALL {
        let mut sub = clap::Command::new(command.name()).about(command.about()).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("flat `key = value` config file; flags override it"),
        );
        for spec in keys_for(command) {
            let mut arg = Arg::new(spec.name).long(flag_name(spec.name)).help(spec.help);
            arg = match spec.kind {
                Kind::Bool => arg.action(ArgAction::SetTrue),
                _ => arg.value_name("VALUE"),
            };
            sub = sub.arg(arg);
        }
        app = app.subcommand(sub);
    }
    app
}

/// A fully resolved configuration: every applicable key with its value (or unset).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub command: Command,
    values: BTreeMap<&'static str, String>,
}

impl RunConfig {
    /// Resolves file values, flag overrides and defaults, then checks required keys.
    pub fn resolve(command: Command, file: BTreeMap<&'static str, String>, flags: BTreeMap<&'static str, String>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for spec in keys_for(command) {
            let v = flags
                .get(spec.name)
                .or_else(|| file.get(spec.name))
                .cloned()
                .or_else(|| spec.default.map(str::to_string));
            match v {
                Some(v) => {
                    values.insert(spec.name, v);
                }
                None if spec.required => {
                    return Err(config_err(format!(
                        "{} needs `{}` (flag --{})",
                        command.name(),
                        spec.name,
                        flag_name(spec.name)
                    )))
                }
                None => {}
            }
        }
        Ok(RunConfig { command, values })
    }

    /// Resolves from clap matches of one subcommand.
    pub fn from_matches(command: Command, m: &ArgMatches) -> Result<Self> {
        let file = match m.get_one::<String>("config") {
            Some(path) => {
                let path = PathBuf::from(path);
                let text = fs::read_to_string(&path).map_err(io_err(&path))?;
                parse_config_text(&text, command, &path)?
            }
            None => BTreeMap::new(),
        };
        let mut flags = BTreeMap::new();
        for spec in keys_for(command) {
            let raw = match spec.kind {
                Kind::Bool => m.get_flag(spec.name).then(|| "true".to_string()),
                _ => m.get_one::<String>(spec.name).cloned(),
            };
            if let Some(raw) = raw {
                flags.insert(spec.name, normalize(spec, &raw)?);
            }
        }
        RunConfig::resolve(command, file, flags)
    }

    /// Parses a full argument list (program name first).
    pub fn from_args<I, T>(args: I) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        let m = cli().try_get_matches_from(args).map_err(|e| config_err(e.to_string()))?;
        let (name, sub) = m.subcommand().expect("subcommand is required");
        let command = Command::from_name(name).expect("registered subcommand");
        RunConfig::from_matches(command, sub)
    }

    /// `key = value` lines for every set key, in registry order.
    pub fn to_text(&self) -> String {
        let mut s = format!("# {}\n", self.command.name());
        for spec in keys_for(self.command) {
            if let Some(v) = self.values.get(spec.name) {
                s.push_str(&format!("{} = {v}\n", spec.name));
            }
        }
        s
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        assert!(
            spec_of(key).is_some_and(|s| applies(s, self.command)),
            "key `{key}` is not registered for {}",
            self.command.name()
        );
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Option<T> {
        self.raw(key).map(|v| v.parse().unwrap_or_else(|_| panic!("`{key}` was validated")))
    }

    pub fn usize(&self, key: &str) -> usize {
        self.parsed(key).unwrap_or_else(|| panic!("`{key}` has a default"))
    }

    pub fn opt_usize(&self, key: &str) -> Option<usize> {
        self.parsed(key)
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.parsed(key).unwrap_or_else(|| panic!("`{key}` has a default"))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.parsed(key).unwrap_or_else(|| panic!("`{key}` has a default"))
    }

    pub fn bool(&self, key: &str) -> bool {
        self.parsed(key).unwrap_or_else(|| panic!("`{key}` has a default"))
    }

    pub fn text(&self, key: &str) -> &str {
        self.raw(key).unwrap_or_else(|| panic!("`{key}` is required"))
    }

    pub fn path(&self, key: &str) -> PathBuf {
        PathBuf::from(self.text(key))
    }

    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Option<Vec<T>> {
        self.raw(key).map(|v| parse_list(v).unwrap_or_else(|| panic!("`{key}` was validated")))
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            num_layers: self.usize("layers"),
            heads: self.usize("heads"),
            input_dim: self.usize("input_dim"),
            hidden_dim: self.usize("hidden_dim"),
            relation_dim: self.usize("relation_dim"),
            fuse_dim: self.usize("fuse_dim"),
            dropout: self.f64("dropout"),
            negative_slope: self.f64("negative_slope"),
            ablation: Ablation {
                no_wrc: self.bool("no_wrc"),
                no_cmp: self.bool("no_cmp"),
                no_rrf: self.bool("no_rrf"),
            },
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let batch_size = self.opt_usize("batch_size");
        let fanouts = self.list("fanouts");
        if self.bool("full_batch") && (batch_size.is_some() || fanouts.is_some()) {
            return Err(config_err("full_batch conflicts with batch_size and fanouts"));
        }
        let mut cfg = TrainConfig {
            lr: self.f64("lr"),
            lr_min: self.f64("lr_min"),
            epochs: self.usize("epochs"),
            patience: self.usize("patience"),
            batch_size,
            fanouts,
            seed: self.u64("seed"),
            ..TrainConfig::default()
        };
        if self.command == Command::TrainLinkpred {
            cfg.negatives_train = self.usize("negatives_train");
            cfg.negatives_eval = self.usize("negatives_eval");
        }
        Ok(cfg)
    }

    /// Thread count from `threads`, else `RHGNN_THREADS`, else the CPU count.
    pub fn threads(&self) -> usize {
        self.opt_usize("threads").unwrap_or_else(crate::parallel::default_threads).max(1)
    }
}
