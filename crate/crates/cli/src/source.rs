use std::sync::Arc;

use shapx_core::models::{masked_game, synthetic_game, Dataset, MaskingRule, SyntheticKind, TabularModel};
use shapx_core::{Checkpoint, CoalitionGame, RandomSource};

use crate::args::GameArgs;
use crate::error::{CliError, CliResult};

pub const FIXTURES: [&str; 6] = ["glove", "additive", "unanimity", "random_uniform", "majority", "mlp"];

/// Hidden widths of the `mlp` fixture model.
pub const FIXTURE_HIDDEN: [usize; 2] = [32, 32];

fn default_players(game: &str) -> usize {
    match game {
        "random_uniform" => 10,
        "majority" => 5,
        "mlp" => 12,
        _ => 3,
    }
}

impl GameArgs {
    /// Fills the defaults of whichever source is selected. With `required`
    /// unset, a missing source is allowed.
    pub fn fill_defaults(&mut self, required: bool) -> CliResult<()> {
        match (&self.game, &self.model) {
            (Some(_), Some(_)) => Err(CliError::Usage("pass either --game or --model, not both".into())),
            (None, None) if required => {
                Err(CliError::Usage("no game given: pass --game <fixture> or --model <file> --data <file>".into()))
            }
            (None, None) => Ok(()),
            (Some(game), None) => {
                let game = game.replace('-', "_");
                if !FIXTURES.contains(&game.as_str()) {
                    return Err(CliError::Usage(format!(
                        "unknown game {game:?}; expected one of {}",
                        FIXTURES.join(", ")
                    )));
                }
                self.players.get_or_insert(default_players(&game));
                self.game_seed.get_or_insert(0);
                if game == "mlp" {
                    self.class.get_or_insert(0);
                }
                self.game = Some(game);
                Ok(())
            }
            (None, Some(_)) => {
                if self.data.is_none() {
                    return Err(CliError::Usage("--model needs --data to select the explained row".into()));
                }
                self.label.get_or_insert_with(|| "label".into());
                self.row.get_or_insert(0);
                self.class.get_or_insert(0);
                self.mask.get_or_insert_with(|| "zeros".into());
                Ok(())
            }
        }
    }
}

pub struct Explained {
    pub game: CoalitionGame,
    pub description: String,
}

pub fn masking_rule(name: &str, data: Option<&Dataset>) -> CliResult<MaskingRule> {
    match (name, data) {
        ("zeros", _) => Ok(MaskingRule::Zeros),
        ("mean", Some(d)) => Ok(MaskingRule::TrainingMean(d.column_means())),
        ("mean", None) => Err(CliError::Usage("--mask mean needs a dataset".into())),
        (other, _) => Err(CliError::Usage(format!("unknown mask {other:?}; expected zeros or mean"))),
    }
}

/// Random two-class MLP of the `mlp` fixture and its explained input.
pub fn fixture_model(d: usize, seed: u64) -> CliResult<(Arc<TabularModel>, Vec<f64>)> {
    let model = Arc::new(TabularModel::random_mlp(d, &FIXTURE_HIDDEN, 2, seed)?);
    let mut rng = RandomSource::new(seed, 5);
    let x = (0..d).map(|_| rng.normal()).collect();
    Ok((model, x))
}

pub fn load_model(path: &std::path::Path) -> CliResult<TabularModel> {
    let ckpt = Checkpoint::load(path)?;
    TabularModel::from_checkpoint(&ckpt).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn build(args: &GameArgs) -> CliResult<Explained> {
    if let Some(game) = &args.game {
        let d = args.players.expect("filled");
        let seed = args.game_seed.expect("filled");
        if game == "mlp" {
            let (model, x) = fixture_model(d, seed)?;
            let class = args.class.expect("filled");
            let g = masked_game(model, &x, class, &MaskingRule::Zeros)?;
            return Ok(Explained {
                game: g,
                description: format!("mlp(d={d}, seed={seed}, class={class})"),
            });
        }
        let kind = SyntheticKind::parse(game, d)?;
        return Ok(Explained {
            game: synthetic_game(&kind, d, seed)?,
            description: format!("{game}(d={d}, seed={seed})"),
        });
    }
    let model_path = args.model.as_deref().expect("source checked");
    let data_path = args.data.as_deref().expect("source checked");
    let model = Arc::new(load_model(model_path)?);
    let data = Dataset::from_csv_path(data_path, args.label.as_deref().expect("filled"))?;
    let row = args.row.expect("filled");
    let x = data
        .features
        .get(row)
        .cloned()
        .ok_or_else(|| CliError::Usage(format!("{}: row {row} out of range ({} rows)", data_path.display(), data.len())))?;
    let class = args.class.expect("filled");
    let rule = masking_rule(args.mask.as_deref().expect("filled"), Some(&data))?;
    let game = masked_game(model, &x, class, &rule)?;
    Ok(Explained {
        game,
        description: format!("{}[row {row}, class {class}]", model_path.display()),
    })
}
