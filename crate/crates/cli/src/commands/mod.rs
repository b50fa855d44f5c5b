pub mod detect;
pub mod eval;
pub mod featurize;
pub mod infer;
pub mod replay;
pub mod serve;
pub mod synth;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::{config_hash, Command};

/// Copy every flag that was given over the file value of the same name.
/// `field` overwrites a plain setting; `some field` fills an optional one.
macro_rules! overlay {
    ($settings:expr, $args:expr; $($kind:ident $field:ident),* $(,)?) => {
        $( overlay!(@ $kind $settings, $args, $field); )*
    };
    (@ set $s:expr, $a:expr, $f:ident) => {
        if let Some(v) = $a.$f.clone() {
            $s.$f = v;
        }
    };
    (@ some $s:expr, $a:expr, $f:ident) => {
        if let Some(v) = $a.$f.clone() {
            $s.$f = Some(v);
        }
    };
}
pub(crate) use overlay;

/// The `--config` document. Each section has the same keys as the
/// subcommand's flags, with `-` spelled `_`.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub synth: Option<synth::SynthSettings>,
    #[serde(default)]
    pub featurize: Option<featurize::FeaturizeSettings>,
    #[serde(default)]
    pub train: Option<train::TrainSettings>,
    #[serde(default)]
    pub eval: Option<eval::EvalSettings>,
    #[serde(default)]
    pub infer: Option<infer::InferSettings>,
    #[serde(default)]
    pub detect: Option<detect::DetectSettings>,
    #[serde(default)]
    pub serve: Option<pmu_serve::ServeConfig>,
    #[serde(default)]
    pub replay: Option<replay::ReplaySettings>,
}

fn announce<T: Serialize>(command: &str, settings: &T) -> String {
    let hash = config_hash(command, settings);
    eprintln!("config hash: {hash}");
    hash
}

pub(crate) fn dispatch(command: Command, file: FileConfig) -> anyhow::Result<()> {
    match command {
        Command::Synth(a) => {
            let s = a.resolve(file.synth.unwrap_or_default());
            announce("synth", &s);
            synth::run(&s)
        }
        Command::Featurize(a) => {
            let s = a.resolve(file.featurize.unwrap_or_default());
            announce("featurize", &s);
            featurize::run(&s)
        }
        Command::Train(a) => {
            let s = a.resolve(file.train.unwrap_or_default());
            announce("train", &s);
            train::run(&s)
        }
        Command::Eval(a) => {
            let s = a.resolve(file.eval.unwrap_or_default());
            let hash = announce("eval", &s);
            eval::run(&s, &hash)
        }
        Command::Infer(a) => {
            let s = a.resolve(file.infer.unwrap_or_default());
            announce("infer", &s);
            infer::run(&s)
        }
        Command::Detect(a) => {
            let s = a.resolve(file.detect.unwrap_or_default());
            announce("detect", &s);
            detect::run(&s)
        }
        Command::Serve(a) => {
            let s = a.resolve(file.serve.unwrap_or_default());
            announce("serve", &s);
            serve::run(s)
        }
        Command::Replay(a) => {
            let fallback = file.serve.map(|s| s.match_config);
            let s = a.resolve(file.replay.unwrap_or_default(), fallback)?;
            announce("replay", &s);
            replay::run(&s)
        }
    }
}
