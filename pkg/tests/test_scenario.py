import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyrange.errors import ScenarioSyntaxError, SchemaError, UnknownNodeError
from cyrange.scenario import (
    Action,
    AttackStep,
    Node,
    ResourceCaps,
    Role,
    Scenario,
    Segment,
    ServiceSpec,
    VulnRef,
    parse_scenario,
    reachability,
    serialize_scenario,
    validate_scenario,
)

MINIMAL = """
name: minimal
nodes:
  - {id: c1, role: client, image: ubuntu}
segments:
  - {id: lan, members: [c1]}
"""


def test_parse_minimal():
    s = parse_scenario(MINIMAL)
    assert s.name == "minimal"
    assert len(s.nodes) == 1
    assert s.nodes[0].role is Role.CLIENT
    assert s.steps == ()


def test_parse_seven_step(seven_step_text):
    s = parse_scenario(seven_step_text)
    assert len(s.steps) == 7
    assert [step.action for step in s.steps] == [
        Action.SCAN, Action.EXPLOIT, Action.BACKDOOR, Action.PIVOT,
        Action.SCAN, Action.PRIVILEGE_ESCALATION, Action.EXFILTRATION,
    ]
    assert s.steps[1].requires_vuln == VulnRef("CVE-2011-2523")


def test_parse_dangling_step_reference():
    doc = MINIMAL + "steps:\n  - {index: 1, actor: c1, target: db9, action: scan}\n"
    with pytest.raises(SchemaError) as excinfo:
        parse_scenario(doc)
    assert "db9" in str(excinfo.value)


def test_parse_syntax_error_reports_position():
    with pytest.raises(ScenarioSyntaxError) as excinfo:
        parse_scenario("name: x\nnodes:\n  - {id: a, role: client\n")
    assert excinfo.value.line is not None


def test_parse_unknown_action_is_hard_error():
    doc = MINIMAL + "steps:\n  - {index: 1, actor: c1, target: c1, action: teleport}\n"
    with pytest.raises(SchemaError) as excinfo:
        parse_scenario(doc)
    assert "teleport" in str(excinfo.value)


def test_parse_unknown_role():
    with pytest.raises(SchemaError):
        parse_scenario("name: x\nnodes:\n  - {id: a, role: mainframe, image: i}\n")


def test_parse_unknown_top_level_key():
    with pytest.raises(SchemaError):
        parse_scenario(MINIMAL + "extra: true\n")


def test_parse_duplicate_node_id():
    doc = """
name: dup
nodes:
  - {id: a, role: client, image: i}
  - {id: a, role: client, image: i}
"""
    with pytest.raises(SchemaError) as excinfo:
        parse_scenario(doc)
    assert "duplicate node id" in str(excinfo.value)


@pytest.mark.parametrize("port", [0, 65536, -3])
def test_parse_port_out_of_range(port):
    doc = f"""
name: p
nodes:
  - id: a
    role: client
    image: i
    services: [{{name: s, port: {port}}}]
"""
    with pytest.raises(SchemaError):
        parse_scenario(doc)


def test_parse_duplicate_port_protocol_pair():
    doc = """
name: p
nodes:
  - id: a
    role: client
    image: i
    services:
      - {name: s1, port: 80}
      - {name: s2, port: 80}
"""
    with pytest.raises(SchemaError):
        parse_scenario(doc)
    # Same port on a different protocol is fine.
    ok = doc.replace("{name: s2, port: 80}", "{name: s2, port: 80, protocol: udp}")
    assert len(parse_scenario(ok).nodes[0].services) == 2


def test_parse_unrecognized_vuln_prefix():
    doc = """
name: v
nodes:
  - {id: a, role: client, image: i, vulns: [GHSA-xxxx]}
"""
    with pytest.raises(SchemaError) as excinfo:
        parse_scenario(doc)
    assert "prefix" in str(excinfo.value)


def test_parse_noncontiguous_step_indices():
    doc = MINIMAL + "steps:\n  - {index: 2, actor: c1, target: c1, action: privilege_escalation}\n"
    with pytest.raises(SchemaError):
        parse_scenario(doc)


def test_parse_self_target_requires_privilege_escalation():
    bad = MINIMAL + "steps:\n  - {index: 1, actor: c1, target: c1, action: scan}\n"
    with pytest.raises(SchemaError):
        parse_scenario(bad)
    ok = MINIMAL + "steps:\n  - {index: 1, actor: c1, target: c1, action: privilege_escalation}\n"
    assert parse_scenario(ok).steps[0].action is Action.PRIVILEGE_ESCALATION


# ---------------------------------------------------------------------------
# validate_scenario


def test_validate_seven_step_clean(seven_step_text):
    assert validate_scenario(parse_scenario(seven_step_text)) == []


def test_validate_missing_required_vuln_warns(seven_step_text):
    s = parse_scenario(seven_step_text.replace("vulns: [CVE-2011-2523]", "vulns: []"))
    diagnostics = validate_scenario(s)
    assert len(diagnostics) == 1
    d = diagnostics[0]
    assert d.severity == "warning"
    assert d.subject == "step:2"
    assert "required vulnerability" in d.message


def test_validate_container_without_caps_warns():
    s = parse_scenario("""
name: caps
nodes:
  - {id: a, role: client, image: i, backend: container}
segments:
  - {id: lan, members: [a]}
""")
    diagnostics = validate_scenario(s)
    assert [d.severity for d in diagnostics] == ["warning"]
    assert "blast radius" in diagnostics[0].message


def test_validate_flags_asymmetric_links():
    s = parse_scenario("""
name: oneway
nodes:
  - {id: a, role: client, image: i}
  - {id: b, role: client, image: i}
segments:
  - {id: s1, members: [a], links: [s2]}
  - {id: s2, members: [b]}
""")
    diagnostics = validate_scenario(s)
    assert [(d.severity, d.subject) for d in diagnostics] == [("warning", "segment:s1")]
    assert "not reciprocated" in diagnostics[0].message


def test_validate_broken_pivot_single_error(seven_step_broken_text):
    diagnostics = validate_scenario(parse_scenario(seven_step_broken_text))
    errors = [d for d in diagnostics if d.severity == "error"]
    assert len(errors) == 1
    assert errors[0].subject == "step:4"
    assert "unreachable" in errors[0].message


def test_validate_output_is_deterministic(seven_step_broken_text):
    s = parse_scenario(seven_step_broken_text)
    first = "\n".join(d.render() for d in validate_scenario(s))
    second = "\n".join(d.render() for d in validate_scenario(s))
    assert first == second


def test_validate_empty_implies_steps_reachable(seven_step_text):
    s = parse_scenario(seven_step_text)
    assert validate_scenario(s) == []
    for step in s.steps:
        assert reachability(s, step.actor, step.target) is not None


# ---------------------------------------------------------------------------
# reachability

TOPOLOGY = """
name: topo
nodes:
  - {id: attacker, role: attacker, image: kali}
  - {id: web, role: web_server, image: msf2}
  - {id: db, role: db_server, image: msf2}
segments:
  - {id: external, members: [attacker], links: [dmz]}
  - {id: dmz, members: [web], links: [external]}
  - {id: dbnet, members: [db]}
"""


def test_reachability_identity_is_own_segment():
    s = parse_scenario(TOPOLOGY)
    assert reachability(s, "attacker", "attacker") == ["external"]


def test_reachability_one_hop():
    s = parse_scenario(TOPOLOGY)
    assert reachability(s, "attacker", "web") == ["external", "dmz"]


def test_reachability_isolated_segment_absent():
    s = parse_scenario(TOPOLOGY)
    assert reachability(s, "attacker", "db") is None


def test_reachability_unknown_node():
    s = parse_scenario(TOPOLOGY)
    with pytest.raises(UnknownNodeError):
        reachability(s, "attacker", "ghost")


def test_reachability_lexicographic_tiebreak():
    s = parse_scenario("""
name: tie
nodes:
  - {id: a, role: client, image: i}
  - {id: m, role: client, image: i}
  - {id: z, role: client, image: i}
segments:
  - {id: s0, members: [a], links: [s1, s2]}
  - {id: s1, members: [m], links: [s3]}
  - {id: s2, members: [m], links: [s3]}
  - {id: s3, members: [z]}
""")
    # Two shortest routes exist (via s1 and via s2); the smaller id wins.
    assert reachability(s, "a", "z") == ["s0", "s1", "s3"]


def test_reachability_symmetric_iff_bidirectional():
    s = parse_scenario(TOPOLOGY)
    assert reachability(s, "attacker", "web") is not None
    assert reachability(s, "web", "attacker") is not None
    one_way = parse_scenario(TOPOLOGY.replace(", links: [external]", ""))
    assert reachability(one_way, "attacker", "web") is not None
    assert reachability(one_way, "web", "attacker") is None


# ---------------------------------------------------------------------------
# round-trip

def test_round_trip_seven_step(seven_step_text):
    s = parse_scenario(seven_step_text)
    assert parse_scenario(serialize_scenario(s)) == s


@st.composite
def scenario_objects(draw):
    node_ids = [f"n{i}" for i in range(draw(st.integers(1, 4)))]
    nodes = []
    for nid in node_ids:
        ports = draw(st.lists(st.integers(1, 65535), unique=True, max_size=3))
        services = tuple(
            ServiceSpec(name=f"svc{j}", port=port,
                        version=draw(st.sampled_from(["", "1.0", "2.3.4"])))
            for j, port in enumerate(ports)
        )
        vulns = tuple(
            VulnRef(id=f"CVE-2020-{draw(st.integers(1000, 9999))}",
                    category=draw(st.sampled_from([None, "kernel"])))
            for _ in range(draw(st.integers(0, 2)))
        )
        nodes.append(Node(
            id=nid,
            role=draw(st.sampled_from(list(Role))),
            image=f"img-{nid}",
            services=services,
            vulns=vulns,
            backend_kind=draw(st.sampled_from([None, "vm", "container"])),
            limits=draw(st.sampled_from([None, ResourceCaps(512, 1024, 50)])),
            export_exclude=draw(st.sampled_from([(), ("/var/cache",)])),
        ))
    seg_ids = [f"s{i}" for i in range(draw(st.integers(1, 3)))]
    segments = tuple(
        Segment(
            id=sid,
            members=tuple(draw(st.lists(st.sampled_from(node_ids), min_size=1,
                                        max_size=len(node_ids), unique=True))),
            links=tuple(draw(st.lists(st.sampled_from(seg_ids), max_size=len(seg_ids), unique=True))),
        )
        for sid in seg_ids
    )
    steps = []
    for index in range(1, draw(st.integers(0, 4)) + 1):
        actor = draw(st.sampled_from(node_ids))
        target = draw(st.sampled_from(node_ids))
        action = (Action.PRIVILEGE_ESCALATION if actor == target
                  else draw(st.sampled_from(list(Action))))
        steps.append(AttackStep(
            index=index, actor=actor, target=target, action=action,
            requires_vuln=draw(st.sampled_from([None, VulnRef("CVE-2011-2523")])),
        ))
    return Scenario(name="generated", nodes=tuple(nodes), segments=segments, steps=tuple(steps))


@settings(max_examples=60, deadline=None)
@given(scenario_objects())
def test_round_trip_generated(scenario):
    assert parse_scenario(serialize_scenario(scenario)) == scenario
