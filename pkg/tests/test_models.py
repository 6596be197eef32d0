"""
Unit tests for the settings, run-configuration schema, exceptions and DTO models.
"""
import json
import math

import numpy as np
import pytest

from config.settings import DppConfig, PlapConfig, settings
from models.dto import (
    AnalysisReport,
    AuditClass,
    AuditReport,
    EpisodeRecord,
    EstimateReport,
    IterationReport,
    PatchSummary,
    SweepRow,
)
from models.exceptions import ConfigurationError, DomainTooSmallError, NumericalFailure
from models.schema import AffineDatum, BallDomain, IntervalDomain, RunConfig, load_run_config


def base_config(**blocks):
    return {
        'problem': {
            'domain': {'kind': 'interval', 'a': 0.0, 'b': 1.0},
            'h': 0.25,
            'epsilon': 0.25,
            'boundary': {'kind': 'constant', 'value': 0.0},
        },
        **blocks,
    }


class TestRunConfig:
    """Test suite for RunConfig validation."""

    def test_minimal(self):
        config = RunConfig.from_dict(base_config(dpp={}))
        assert isinstance(config.problem.domain, IntervalDomain)
        assert config.problem.dim == 1
        assert config.problem.lambda0 == 1.0
        assert config.dpp.operator == 'pay_or_leave'
        assert config.dpp.sweep == 'jacobi'
        assert config.plap is None

    def test_ball_dimension_from_center(self):
        data = base_config()
        data['problem']['domain'] = {'kind': 'ball', 'center': [0.0, 0.0], 'radius': 1.0}
        config = RunConfig.from_dict(data)
        assert isinstance(config.problem.domain, BallDomain)
        assert config.problem.dim == 2

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError) as excinfo:
            RunConfig.from_dict(base_config(colour='blue'))
        assert excinfo.value.key == 'colour'

    def test_nested_key_is_dotted(self):
        data = base_config()
        data['problem']['h'] = -0.1
        with pytest.raises(ConfigurationError) as excinfo:
            RunConfig.from_dict(data)
        assert excinfo.value.key == 'problem.h'
        assert str(excinfo.value).startswith('problem.h: ')

    def test_interval_order(self):
        data = base_config()
        data['problem']['domain'] = {'kind': 'interval', 'a': 1.0, 'b': 0.0}
        with pytest.raises(ConfigurationError, match='a < b'):
            RunConfig.from_dict(data)

    def test_affine_slope_dimension(self):
        data = base_config()
        data['problem']['boundary'] = {'kind': 'affine', 'slope': [1.0, 2.0]}
        with pytest.raises(ConfigurationError, match='1 component'):
            RunConfig.from_dict(data)

    def test_p_range(self):
        with pytest.raises(ConfigurationError, match='outside'):
            RunConfig.from_dict(base_config(plap={'p_list': [1.5]}))

    def test_table_needs_one_source(self):
        data = base_config()
        data['problem']['boundary'] = {'kind': 'table'}
        with pytest.raises(ConfigurationError, match='exactly one'):
            RunConfig.from_dict(data)

    def test_oracle_parameters(self):
        data = base_config()
        data['problem']['boundary'] = {'kind': 'oracle', 'name': 'dead_core', 'radius': 1.0, 'kappa': 1.0}
        with pytest.raises(ConfigurationError, match="'lambda0' and 'p'"):
            RunConfig.from_dict(data)

    def test_game_seed_range(self):
        with pytest.raises(ConfigurationError) as excinfo:
            RunConfig.from_dict(base_config(game={'episodes': 10, 'start': [0.5], 'seed': 2 ** 64}))
        assert excinfo.value.key == 'game.seed'

    def test_analyze_file_needs_path(self):
        with pytest.raises(ConfigurationError, match='field_path'):
            RunConfig.from_dict(base_config(analyze={'radii': [0.1], 'rho': 0.1, 'field': 'file'}))

    def test_frozen(self):
        config = RunConfig.from_dict(base_config())
        with pytest.raises(Exception):
            config.problem.h = 1.0

    def test_from_json_invalid(self):
        with pytest.raises(ConfigurationError) as excinfo:
            RunConfig.from_json('{"problem": ')
        assert excinfo.value.key == 'config'

    def test_from_json_not_object(self):
        with pytest.raises(ConfigurationError, match='object'):
            RunConfig.from_json('[1, 2]')

    def test_load_run_config(self, tmp_path):
        path = tmp_path / 'run.json'
        path.write_text(json.dumps(base_config(dpp={'tol': 1e-6})))
        assert load_run_config(path).dpp.tol == 1e-6

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError) as excinfo:
            load_run_config(tmp_path / 'missing.json')
        assert excinfo.value.key == 'config'

    def test_affine_default_offset(self):
        assert AffineDatum(slope=[1.0]).offset == 0.0


class TestExceptions:
    """Test suite for the exception hierarchy."""

    def test_key_prefix(self):
        assert str(ConfigurationError("must be positive", key='h')) == 'h: must be positive'

    def test_key_already_in_message(self):
        assert str(ConfigurationError("epsilon=0.3 is not a multiple", key='epsilon')) == \
            'epsilon=0.3 is not a multiple'

    def test_no_key(self):
        assert str(ConfigurationError("bad")) == 'bad'

    def test_hierarchy(self):
        assert issubclass(DomainTooSmallError, ConfigurationError)
        assert issubclass(ConfigurationError, ValueError)

    def test_numerical_failure_report(self):
        assert NumericalFailure("boom").report == {}
        assert NumericalFailure("boom", {'max_gradient': 1e300}).report['max_gradient'] == 1e300


class TestIterationReport:
    """Test suite for IterationReport."""

    def test_to_dict_without_timing(self):
        report = IterationReport(iterations=12, final_residual=1e-10, monotone=True, wall_time=0.5)
        assert 'wall_time_s' not in report.to_dict(include_timing=False)
        assert report.to_dict()['wall_time_s'] == 0.5

    def test_from_json(self):
        report = IterationReport.from_json(
            '{"iterations": 3, "final_residual": 0.5, "monotone": false, "converged": false}'
        )
        assert report.iterations == 3
        assert not report.monotone
        assert not report.converged
        assert report.wall_time == 0.0

    def test_str(self):
        text = str(IterationReport(iterations=2, final_residual=1.0, monotone=True, converged=False))
        assert 'UNCONVERGED' in text


class TestEpisodeRecord:
    """Test suite for EpisodeRecord."""

    def test_from_json(self):
        line = json.dumps({
            'positions': [1, 2, 3], 'coin_flips': [1], 'theta2': [0, 1], 'theta1': [1, 1],
            'bought_turns': 1, 'payoff': 0.25, 'terminal': 'strip', 'episode': 7,
        })
        record = EpisodeRecord.from_json(line)
        assert record.steps == 2
        assert not record.truncated
        assert record.episode == 7
        assert record.to_dict()['positions'] == [1, 2, 3]

    def test_truncated(self):
        record = EpisodeRecord.from_dict({'positions': [4], 'payoff': 0.0, 'terminal': 'truncated'})
        assert record.truncated
        assert record.steps == 0
        assert 'truncated' in str(record)


class TestReports:
    """Test suite for the report DTOs."""

    def test_estimate_round_trip(self):
        report = EstimateReport(mean=0.5, stderr=0.01, episodes=100, truncated=2)
        assert EstimateReport.from_dict(report.to_dict()) == report

    def test_audit_flagged(self):
        report = AuditReport(classes={
            'tug': AuditClass(steps=10, mean_increment=0.0, stderr=0.1, flagged=False),
            'buy': AuditClass(steps=5, mean_increment=0.4, stderr=0.01, flagged=True),
        })
        assert report.flagged == ['buy']
        assert report.to_dict()['classes']['buy']['steps'] == 5

    def test_analysis_report_cleans_non_finite(self):
        report = AnalysisReport(nondeg_min_ratio=math.nan, density_min=np.float64(0.5),
                                growth_c2=math.inf, fb_points=3, notes=['x'])
        data = report.to_dict()
        assert data['nondeg_min_ratio'] is None
        assert data['growth_c2'] is None
        assert data['density_min'] == 0.5
        assert data['fb_points'] == 3
        assert data['notes'] == ['x']
        json.dumps(data, allow_nan=False)

    def test_sweep_row_failure(self):
        row = SweepRow(p=4.0, sup_dist=None, lipschitz=None, hausdorff=None, converged=False,
                       error='diverged', solution=object())
        data = row.to_dict()
        assert 'solution' not in data
        assert data['error'] == 'diverged'

    def test_patch_summary(self):
        data = PatchSummary(n_components=2, V_fraction=0.5, theta_tol=1e-3,
                            sup_diff_vs_dpp=math.nan).to_dict()
        assert data['sup_diff_vs_dpp'] is None
        assert data['n_components'] == 2


class TestSettings:
    """Test suite for solver defaults."""

    def test_dpp_defaults(self):
        config = DppConfig()
        assert config.log_every == 10_000
        assert config.sweep == 'jacobi'

    def test_plap_tolerance_defaults(self):
        config = PlapConfig()
        assert config.tol_grad == 1e-3
        assert config.max_restarts == 3

    def test_plap_block_follows_settings(self, mocker):
        mocker.patch.object(settings.plap, 'tol_grad', 5e-4)
        block = RunConfig.from_dict(base_config(plap={'p_list': [4.0]})).plap
        assert block.options.tol_grad == 5e-4
