//! One function per subcommand. Each writes its outputs and a run manifest
//! into its output directory.

mod ablate;
mod efficiency;
mod eval;
mod prep;
mod score;
mod train;

pub use ablate::{ablate, AblationRow, Axis};
pub use efficiency::{efficiency, render_efficiency, EfficiencyRow};
pub use eval::eval;
pub use prep::prep;
pub use score::{score, ScoreReport};
pub use train::{train, TrainArgs};
