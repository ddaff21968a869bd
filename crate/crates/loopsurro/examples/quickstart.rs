//! Train a residual surrogate for the cubic loop and simulate with
//! error-controlled fallback.

use loopsurro::multimodel::SurrogateBundle;
use loopsurro::newton::ToleranceSpec;
use loopsurro::nn::{init_network, Activation, LrSchedule};
use loopsurro::problems::by_name;
use loopsurro::sampling::{sobol_sample, Dataset, InputBounds, SampleMethod};
use loopsurro::simulate::{simulate_classical, simulate_surrogate, SimConfig};
use loopsurro::training::{train, LossMode, TrainConfig};

fn main() -> loopsurro::Result<()> {
    let problem = by_name("cubicloop")?;
    let bounds = InputBounds::new(problem.system.input_bounds().unwrap().to_vec())?;
    let dataset = Dataset::inputs_only(
        sobol_sample(&bounds, 2000, 1)?,
        SampleMethod::Sobol,
        std::time::Duration::ZERO,
    );

    let net = init_network(&[1, 32, 32, 1], Activation::ReLU, 7)?;
    let schedule = LrSchedule::new(2e-3, 300)?;
    let config = TrainConfig::new(300, schedule, LossMode::Residual, 7);
    let (net, report) = train(&problem.system, &dataset, None, net, &config)?;
    println!("trained to loss {:.3e} in {} epochs", report.final_train_loss, report.epochs_run);

    let sim = SimConfig::for_problem(&problem, 200)?;
    let classical = simulate_classical(&problem, &sim)?;
    let bundle = SurrogateBundle::single(net, "cubicloop");
    let fallback = ToleranceSpec::new(5e-3, 0.0, 60)?;
    let surrogate = simulate_surrogate(&problem, &bundle, &fallback, &sim)?;
    println!(
        "fallback rate {:.2}, Newton iterations {} vs classical {}",
        surrogate.fallback_rate,
        surrogate.total_newton_iterations(),
        classical.total_newton_iterations()
    );
    Ok(())
}
