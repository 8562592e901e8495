import json
from functools import wraps

import click

from app import config
from app.domain.model.servo import OBJECT_NAMES, ServoConfig
from app.domain.model.shape import BASIS_FAMILIES, FitMethod
from app.domain.service.benchmark_service import BenchmarkService, summarize_trace
from app.domain.service.servo_service import ServoService
from app.infrastructure.factory_bot.scripts import DEMO_STEPS, demo_script
from app.pkgs.errors import Error, ExitCode


def handle_errors(func):
    """Domain errors end the command with exit code 1 and a JSON description on stderr"""

    @wraps(func)
    @click.pass_context
    def wrapper(ctx, *args, **kwargs):
        try:
            return ctx.invoke(func, *args, **kwargs)
        except click.exceptions.Exit:
            raise
        except Error as e:
            click.echo(json.dumps(e.to_json(), default=str), err=True)
            ctx.exit(ExitCode.error)
        except Exception as e:
            click.echo(json.dumps(Error(f'Unknown error: {e}').to_json(), default=str), err=True)
            ctx.exit(ExitCode.error)

    return wrapper


def override_options(func):
    """Per-subcommand overrides of the experiment config"""
    options = [
        click.option('--eta', type=int, default=None, help='receding window size'),
        click.option('--h', 'horizon', type=int, default=None, help='controller horizon'),
        click.option('--mu', type=float, nargs=3, default=None, help='estimator weights mu1 mu2 mu3'),
        click.option('--d', 'support_radius', type=float, default=None, help='MLS support radius'),
        click.option('--m', 'pca_rank', type=int, default=None, help='MLS PCA rank'),
        click.option('--order', type=int, default=None, help='basis order (both directions on surfaces)'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def apply_overrides(cfg: ServoConfig, eta=None, horizon=None, mu=None, support_radius=None, pca_rank=None,
                    order=None) -> ServoConfig:
    mu = tuple(mu) if mu else (None, None, None)
    return cfg.with_overrides(**{
        'rtm.eta': eta, 'mpc.horizon_h': horizon, 'rtm.mu1': mu[0], 'rtm.mu2': mu[1], 'rtm.mu3': mu[2],
        'fitting.support_radius_d': support_radius, 'fitting.pca_rank_m': pca_rank,
        'fitting.order_n': order, 'fitting.order_nx': order, 'fitting.order_ny': order,
    })


def echo_json(data: dict):
    click.echo(json.dumps(data, indent=2, default=str))


@click.group()
@click.option('-m', '--mode',
              default='develop',
              help='mode develop, test or production'
              )
@click.option('-c', '--config', 'config_file',
              default=None,
              help='experiment config (JSON); defaults follow --object'
              )
@click.option('-o', '--object', 'object_name',
              type=click.Choice(OBJECT_NAMES),
              default='cable',
              help='object whose default config is used when no --config is given'
              )
@click.option('--seed', type=int, default=None, help='random seed of babble and occlusion masks')
@click.option('--out', default=None, help='output directory')
@click.option('--occlusion', default=None, help='occlusion schedule, e.g. fraction:0.3:7@0-')
@click.pass_context
def cli(ctx, mode: str, config_file: str, object_name: str, seed: int, out: str, occlusion: str):
    # ensure that ctx.obj exists and is a dict (in case `cli()` is called
    # by means other than the `if` block below
    ctx.ensure_object(dict)

    ctx.obj['mode'] = mode
    ctx.obj['config_file'] = config_file
    ctx.obj['object_name'] = object_name
    ctx.obj['overrides'] = {'seed': seed, 'occlusion': occlusion}
    ctx.obj['out'] = out


def services(ctx):
    """Wire the stores for the requested mode once per invocation"""
    if 'container' not in ctx.obj:
        from app.cmd.center_store import build_container
        config.cli_config = config.Config(ctx.obj['mode'])
        ctx.obj['container'] = build_container(config.cli_config)
    container = ctx.obj['container']
    return container.get_singleton(ServoService), container.get_singleton(BenchmarkService)


def servo_config(ctx) -> ServoConfig:
    if ctx.obj['config_file']:
        cfg = ServoConfig.from_file(ctx.obj['config_file'])
    else:
        cfg = ServoConfig.for_object(ctx.obj['object_name'])
    return cfg.with_overrides(**ctx.obj['overrides'])


def out_dir(ctx) -> str:
    return ctx.obj['out'] or config.cli_config.OUTPUT_DIR


@cli.command('print-config')
@override_options
@handle_errors
def print_config(**overrides):
    ctx = click.get_current_context()
    click.echo(apply_overrides(servo_config(ctx), **overrides).json(indent=2))


@cli.command()
@click.option('-n', '--steps', type=int, default=500, help='babble steps')
@click.option('-a', '--amplitude', type=float, default=0.005, help='largest command component (m)')
@handle_errors
def dataset(steps: int, amplitude: float):
    ctx = click.get_current_context()
    _, benchmark_service = services(ctx)
    cfg = servo_config(ctx)
    data = benchmark_service.generate_dataset(cfg, steps, amplitude, out_dir(ctx))
    echo_json({'steps': len(data), 'kind': data.kind, 'n_points': data.n_points, 'out': out_dir(ctx)})


@cli.command('fit-bench')
@click.option('--corpus', required=True, help='corpus CSV written by the dataset command')
@click.option('--method', 'methods', multiple=True, type=click.Choice([FitMethod.lsm, FitMethod.mls]))
@click.option('--family', 'families', multiple=True, type=click.Choice(BASIS_FAMILIES))
@click.option('--order', 'orders', multiple=True, type=int)
@click.option('--d', 'support_radius', type=float, default=0.2, help='MLS support radius')
@click.option('--m', 'pca_rank', type=int, default=1, help='MLS PCA rank')
@handle_errors
def fit_bench(corpus: str, methods, families, orders, support_radius: float, pca_rank: int):
    ctx = click.get_current_context()
    _, benchmark_service = services(ctx)
    reports = benchmark_service.run_fit_benchmark(corpus, out_dir=out_dir(ctx), d=support_radius, m=pca_rank,
                                                  methods=methods, families=families, orders=orders)
    echo_json({'cells': [r.to_json() for r in reports]})


@cli.command('estimate-bench')
@click.option('--dataset', 'dataset_path', required=True, help='dataset CSV written by the dataset command')
@click.option('--method', 'methods', multiple=True, default=('rtm:5', 'rtm:20', 'broyden'),
              help='rtm[:ETA] or broyden[:GAIN], repeatable')
@click.option('--warmup', type=int, default=10, help='steps used for the least-squares warm start')
@override_options
@handle_errors
def estimate_bench(dataset_path: str, methods, warmup: int, **overrides):
    ctx = click.get_current_context()
    _, benchmark_service = services(ctx)
    cfg = apply_overrides(servo_config(ctx), **overrides)
    traces = benchmark_service.run_estimator_compare(dataset_path, cfg, methods, warmup, out_dir(ctx))
    echo_json({label: summarize_trace(rows) for label, rows in traces.items()})


@cli.command('record-target')
@click.option('--script', default=None, help='CSV of ux,uy,uz commands; the default demonstration otherwise')
@click.option('--steps', type=int, default=DEMO_STEPS, help='length of the default demonstration')
@click.option('--target', default=None, help='where to write the target (default: <out>/target.csv)')
@override_options
@handle_errors
def record_target(script: str, steps: int, target: str, **overrides):
    ctx = click.get_current_context()
    servo_service, _ = services(ctx)
    cfg = apply_overrides(servo_config(ctx), **overrides)
    commands = servo_service.target_repo.load_script(script) if script else demo_script(cfg.plant.object, steps)
    path = target or servo_service.store.output_path(out_dir(ctx), 'target.csv')
    recorded = servo_service.record_target(cfg, commands, path)
    echo_json({'target': path, 'steps': recorded.script_steps, 'grasp': recorded.grasp,
               'features': recorded.feature.size})


@cli.command()
@click.option('--target', default=None, help='target CSV (overrides target_file of the config)')
@click.option('--estimator', type=click.Choice(['rtm', 'broyden']), default=None)
@override_options
@handle_errors
def servo(target: str, estimator: str, **overrides):
    ctx = click.get_current_context()
    servo_service, _ = services(ctx)
    cfg = apply_overrides(servo_config(ctx), **overrides).with_overrides(target_file=target, estimator=estimator)
    metrics, timing = servo_service.run_servo_timed(cfg, out_dir=out_dir(ctx))
    summary = {k: v for k, v in metrics.to_json().items() if k != 'error_series'}
    summary['timing'] = timing.to_json()
    echo_json(summary)
    ctx.exit(ExitCode.converged if metrics.converged else ExitCode.stalled)


@cli.command('horizon-study')
@click.option('--target', default=None, help='target CSV (overrides target_file of the config)')
@click.option('--horizon', 'horizons', multiple=True, type=int, default=(5, 15))
@override_options
@handle_errors
def horizon_study(target: str, horizons, **overrides):
    ctx = click.get_current_context()
    servo_service, _ = services(ctx)
    cfg = apply_overrides(servo_config(ctx), **overrides).with_overrides(target_file=target)
    results = servo_service.run_horizon_study(cfg, horizons, out_dir=out_dir(ctx))
    echo_json({f'h{h}': {'converged': m.converged, 'T_max': m.T_max, 't_d': m.t_d, 't_s': m.t_s,
                         'd_eff': m.d_eff} for h, m in results.items()})
    ctx.exit(ExitCode.converged if all(m.converged for m in results.values()) else ExitCode.stalled)


if __name__ == "__main__":
    cli()
