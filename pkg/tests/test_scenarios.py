"""Scenario schema, built-in generators, and compile-time validation."""

import json
import math

import pytest

from riskplan.errors import SchemaError
from riskplan.ltl import Fragment, classify, parse
from riskplan.oracles import policy_eval
from riskplan.scenarios import (
    BUILTIN,
    builtin,
    canonical_hash,
    compile_scenario,
    config_from_dict,
    config_to_dict,
    gen_pedestrian,
    load,
    save,
)
from riskplan.simplex import OPTIMAL
from riskplan.synth import build_lp, synthesize

TOY_TOML = """
schema_version = 1
name = "toy"

[grid]
x_min = 0.0
x_max = 3.0
y_min = 0.0
y_max = 1.0
cell = 1.0

[[grid.actions]]
name = "go"
intended = [1, 0]
outcomes = [[1, 0, 1.0]]

[labels]
c2_0 = ["t"]

[environment]
states = ["calm"]
initial = "calm"

[[environment.transitions]]
from = "calm"
to = "calm"
p = 1.0

[spec]
ap = ["b", "t"]
cosafe = "F t"
safety = "G !b"

[costs]

[synthesis]
gamma = 0.95
"""

TOY_JSON = {
    "schema_version": 1,
    "name": "toy",
    "grid": {
        "x_min": 0.0,
        "x_max": 3.0,
        "y_min": 0.0,
        "y_max": 1.0,
        "cell": 1.0,
        "actions": [{"name": "go", "intended": [1, 0], "outcomes": [[1, 0, 1.0]]}],
    },
    "labels": {"c2_0": ["t"]},
    "environment": {
        "states": ["calm"],
        "initial": "calm",
        "transitions": [{"from": "calm", "to": "calm", "p": 1.0}],
    },
    "spec": {"ap": ["b", "t"], "cosafe": "F t", "safety": "G !b"},
    "costs": {},
    "synthesis": {"gamma": 0.95},
}


def cell_lookup(comp):
    return {i: comp.composed.pair_of(i)[0] for i in range(comp.composed.n_states)}


class TestGenerators:
    def test_builtin_registry_is_complete(self):
        assert set(BUILTIN) == {"construction", "pedestrian", "intersection", "reach-avoid"}

    def test_unknown_builtin_lists_the_choices(self):
        with pytest.raises(SchemaError, match="construction.*reach-avoid"):
            builtin("roundabout")

    @pytest.mark.parametrize("name", sorted(BUILTIN))
    def test_formulas_sit_in_their_fragments(self, name):
        cfg = builtin(name)
        assert classify(parse(cfg.spec.cosafe, cfg.spec.ap)) is Fragment.COSAFETY
        assert classify(parse(cfg.spec.safety, cfg.spec.ap)) is Fragment.SAFETY

    @pytest.mark.parametrize("name", sorted(BUILTIN))
    def test_start_position_lies_inside_the_grid(self, name):
        cfg = builtin(name)
        g = cfg.grid
        assert g.x_min <= cfg.start[0] <= g.x_max
        assert g.y_min <= cfg.start[1] <= g.y_max

    def test_intersection_lp_has_2880_decision_variables(self):
        comp = compile_scenario(builtin("intersection"))
        lp = build_lp(comp.product, comp.synth)
        assert len(lp.columns) == 2880

    @pytest.mark.parametrize("name", sorted(BUILTIN))
    def test_unbounded_risk_solve_is_feasible(self, name):
        comp = compile_scenario(builtin(name), r_th=math.inf)
        sol = synthesize(comp.product, comp.synth)
        assert sol.status == OPTIMAL

    def test_construction_violation_mass_prefers_the_cheap_lane(self):
        comp = compile_scenario(builtin("construction"))
        sol = synthesize(comp.product, comp.synth)
        assert sol.status == OPTIMAL
        p, gamma = comp.product, comp.synth.gamma
        inflow = {}
        for (z, a), beta in sol.beta.items():
            for z2, pr in p.rows[(z, a)]:
                if z2 in p.dead:
                    inflow[p.cost[z2]] = inflow.get(p.cost[z2], 0.0) + gamma * beta * pr
        share = inflow.get(2.0, 0.0) / sum(inflow.values())
        assert share > 0.9

    def test_construction_corridor_risks_echo_the_cost_table(self):
        comp = compile_scenario(builtin("construction"))
        p, gamma = comp.product, comp.synth.gamma
        names = [a.name for a in comp.grid.primitives]
        fwd, left, right = names.index("fwd"), names.index("fwd_left"), names.index("fwd_right")
        cells = cell_lookup(comp)

        def corridor(rule):
            rows = {}
            for z in range(p.n_states):
                if p.is_terminal(z):
                    continue
                _, iy = comp.grid.coords(cells[p.states[z][0]])
                rows[z] = ((rule(iy), 1.0),)
            return rows

        risk_o = policy_eval(p, corridor(lambda iy: left if iy < 2 else fwd), gamma).risk
        risk_s = policy_eval(p, corridor(lambda iy: right if iy > 0 else fwd), gamma).risk
        risk_c = policy_eval(p, corridor(lambda iy: fwd), gamma).risk
        assert risk_o < risk_s < risk_c
        assert risk_o == pytest.approx(2.0 * 0.95**2)
        assert risk_s == pytest.approx(5.0 * 0.95**2)
        assert risk_c == pytest.approx(10.0 * 0.95**5)

    def test_pedestrian_threshold_grid_and_guard(self):
        cfg = builtin("pedestrian")
        assert cfg.spec.safety == "G(p -> !c)"
        assert cfg.synthesis.r_th_grid == (0.1, 1.0, 5.0, 10.0)
        assert cfg.costs == ((("c", "p"), 10.0),)

    def test_pedestrian_stationary_variant_is_feasible_but_goalless(self):
        cfg = gen_pedestrian(stationary=True)
        comp = compile_scenario(cfg)
        sol = synthesize(comp.product, comp.synth)
        assert sol.status == OPTIMAL
        assert sol.objective == 0.0  # the crossing never clears
        assert sol.risk <= cfg.synthesis.r_th

    def test_reach_avoid_threshold_changes_the_solution(self):
        cfg = builtin("reach-avoid")
        tight = synthesize(*_pair(compile_scenario(cfg, r_th=0.5)))
        loose = synthesize(*_pair(compile_scenario(cfg, r_th=5.0)))
        assert tight.status == loose.status == OPTIMAL
        assert loose.objective > tight.objective + 0.05

    def test_compile_overrides_threshold_and_gamma(self):
        comp = compile_scenario(builtin("construction"), r_th=2.5, gamma=0.9)
        assert comp.synth.r_th == 2.5
        assert comp.synth.gamma == 0.9

    def test_compile_seeds_vehicle_at_the_declared_start(self):
        cfg = builtin("pedestrian")
        comp = compile_scenario(cfg)
        assert (comp.initial_state.px, comp.initial_state.py) == cfg.start[:2]


def _pair(comp):
    return comp.product, comp.synth


class TestRoundTrip:
    @pytest.mark.parametrize("name", sorted(BUILTIN))
    def test_save_then_load_is_identity(self, name, tmp_path):
        cfg = builtin(name)
        path = tmp_path / f"{name}.json"
        save(cfg, path)
        again = load(path)
        assert again == cfg
        assert canonical_hash(again) == canonical_hash(cfg)

    def test_toml_and_json_renderings_agree(self, tmp_path):
        toml_path = tmp_path / "toy.toml"
        toml_path.write_text(TOY_TOML, encoding="utf-8")
        json_path = tmp_path / "toy.json"
        json_path.write_text(json.dumps(TOY_JSON), encoding="utf-8")
        a, b = load(toml_path), load(json_path)
        assert a == b
        assert canonical_hash(a) == canonical_hash(b)

    def test_unknown_suffix_sniffs_both_formats(self, tmp_path):
        p1 = tmp_path / "scenario.cfg"
        p1.write_text(json.dumps(TOY_JSON), encoding="utf-8")
        p2 = tmp_path / "scenario2.cfg"
        p2.write_text(TOY_TOML, encoding="utf-8")
        assert load(p1) == load(p2)

    def test_infinite_threshold_survives_the_file_format(self, tmp_path):
        cfg = builtin("construction")
        data = config_to_dict(cfg)
        data["synthesis"]["r_th"] = "inf"
        cfg2 = config_from_dict(data)
        assert math.isinf(cfg2.synthesis.r_th)
        path = tmp_path / "c.json"
        save(cfg2, path)
        assert math.isinf(load(path).synthesis.r_th)

    def test_hash_tracks_content_not_formatting(self):
        base = config_from_dict(TOY_JSON)
        shuffled = json.loads(json.dumps(TOY_JSON))
        shuffled["synthesis"] = dict(reversed(list(shuffled["synthesis"].items())))
        assert canonical_hash(config_from_dict(shuffled)) == canonical_hash(base)
        changed = json.loads(json.dumps(TOY_JSON))
        changed["synthesis"]["gamma"] = 0.9
        assert canonical_hash(config_from_dict(changed)) != canonical_hash(base)


class TestSchemaErrors:
    def _toy(self):
        return json.loads(json.dumps(TOY_JSON))

    def test_gamma_outside_open_interval(self):
        data = self._toy()
        data["synthesis"]["gamma"] = 1.0
        with pytest.raises(SchemaError, match=r"synthesis\.gamma"):
            config_from_dict(data)

    def test_missing_section_reports_its_path(self):
        data = self._toy()
        del data["grid"]
        with pytest.raises(SchemaError, match="grid"):
            config_from_dict(data)

    def test_uncovered_violation_cost_names_the_letter(self):
        data = config_to_dict(builtin("construction"))
        del data["costs"]["o"]
        with pytest.raises(SchemaError, match=r"cost\.o"):
            config_from_dict(data)

    def test_label_on_unknown_state(self):
        data = self._toy()
        data["labels"]["c9_9"] = ["t"]
        with pytest.raises(SchemaError, match="labels"):
            config_from_dict(data)

    def test_wrong_fragment_in_the_cosafe_slot(self):
        data = self._toy()
        data["spec"]["cosafe"] = "G !b"
        with pytest.raises(SchemaError, match=r"spec\.cosafe"):
            config_from_dict(data)

    def test_start_outside_the_grid(self):
        data = self._toy()
        data["start"] = [99.0, 0.5, 0.0, 0.0]
        with pytest.raises(SchemaError, match="start"):
            config_from_dict(data)

    def test_environment_rows_must_be_stochastic(self):
        data = self._toy()
        data["environment"]["transitions"][0]["p"] = 0.25
        with pytest.raises(SchemaError, match="environment"):
            config_from_dict(data)

    def test_unsupported_schema_version(self):
        data = self._toy()
        data["schema_version"] = 99
        with pytest.raises(SchemaError, match="version"):
            config_from_dict(data)

    def test_broken_toml_reports_a_parse_error(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[grid\nx_min = ", encoding="utf-8")
        with pytest.raises(SchemaError, match="TOML parse error"):
            load(path)

    def test_broken_json_reports_a_parse_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\"name\": ", encoding="utf-8")
        with pytest.raises(SchemaError, match="JSON parse error"):
            load(path)

    def test_unparseable_unknown_suffix(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_bytes(b"\x00\x01\x02 not a config")
        with pytest.raises(SchemaError, match="neither valid JSON nor valid TOML"):
            load(path)
