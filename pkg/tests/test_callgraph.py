import re

import pytest

from droidflow.callgraph import (
    DEFAULT_CALLBACKS,
    DEFAULT_LIFECYCLE,
    CyclicHierarchyError,
    build_call_graph,
    build_class_hierarchy,
    collect_entry_points,
)
from droidflow.icc import DEFAULT_INTENT_SENDERS

from appbuild import build_app, cls, component, ins, invoke, method

OBJ = "Ljava/lang/Object;"
ACT = "Landroid/app/Activity;"
SMS = "Landroid/telephony/SmsManager;->sendTextMessage(Ljava/lang/String;)V"
SET_LISTENER = "Landroid/view/View;->setOnClickListener(Landroid/view/View$OnClickListener;)V"
SET_TOUCH = "Landroid/view/View;->setOnTouchListener(Landroid/view/View$OnTouchListener;)V"
START_ACT = "Landroid/app/Activity;->startActivity(Landroid/content/Intent;)V"
SEND_BC = "Landroid/content/Context;->sendBroadcast(Landroid/content/Intent;)V"


# ---------------------------------------------------------------------------
# Brute-force reference: naive iterate-until-stable closure over a naive
# per-instruction resolver. Deliberately shares no code with the builder.
# ---------------------------------------------------------------------------

def _sig_parts(signature):
    owner, _, rest = signature.partition("->")
    name, _, desc = rest.partition("(")
    return owner, name, "(" + desc


def _ancestry(app, name):
    chain = [name]
    cur = app.classes.get(name)
    while cur is not None:
        chain.append(cur.superclass)
        cur = app.classes.get(cur.superclass)
    return chain


def _naive_targets(app, instruction):
    if instruction.invoked_method is None:
        return set()
    owner, name, desc = _sig_parts(instruction.invoked_method)
    mnemonic = instruction.opcode.mnemonic
    found = set()

    def defined_in_chain(start):
        for cname in _ancestry(app, start):
            cd = app.classes.get(cname)
            if cd is None:
                continue
            for m in cd.methods:
                if m.name == name and m.descriptor == desc:
                    return m.method_id
        return None

    if mnemonic.startswith(("invoke-virtual", "invoke-interface")):
        inherited = defined_in_chain(owner)
        if inherited:
            found.add(inherited)
        for cd in app.classes.values():
            in_subtree = owner in _ancestry(app, cd.name)
            implements = any(
                owner in app.classes[a].interfaces
                for a in _ancestry(app, cd.name)
                if a in app.classes
            )
            if in_subtree or implements:
                for m in cd.methods:
                    if m.name == name and m.descriptor == desc:
                        found.add(m.method_id)
    elif mnemonic.startswith("invoke-super"):
        cd = app.classes.get(owner)
        start = cd.superclass if cd is not None else owner
        target = defined_in_chain(start) or defined_in_chain(owner)
        if target:
            found.add(target)
    else:
        target = defined_in_chain(owner)
        if target:
            found.add(target)
    return found


def _naive_entries(app):
    entries = set()
    for comp in app.components:
        if comp.path_name not in app.classes:
            continue
        wanted = set(DEFAULT_LIFECYCLE[comp.category]) | set(DEFAULT_CALLBACKS)
        for mname in wanted:
            for cname in _ancestry(app, comp.path_name):
                cd = app.classes.get(cname)
                if cd is None:
                    continue
                hit = [m for m in cd.methods if m.name == mname]
                if hit:
                    entries.add(hit[0].method_id)
                    break
    return entries


def _naive_intent_targets(app, body, send_index):
    boundary = 0
    for i in range(send_index - 1, -1, -1):
        prev = body[i]
        if prev.invoked_method is None:
            continue
        owner = prev.invoked_method.partition("->")[0]
        pname = prev.invoked_method.partition("->")[2].partition("(")[0]
        if owner in app.classes or pname in DEFAULT_INTENT_SENDERS:
            boundary = i + 1
            break
    comp_names = {c.path_name for c in app.components}
    explicit, actions = set(), set()
    for instr in body[boundary : send_index + 1]:
        for op in instr.operands:
            if op in comp_names:
                explicit.add(op)
            for s in re.findall(r'"([^"]*)"', op):
                as_class = "L" + s.replace(".", "/") + ";"
                if as_class in comp_names:
                    explicit.add(as_class)
                else:
                    actions.add(s)
    if explicit:
        return [c for c in app.components if c.path_name in explicit]
    return [
        c for c in app.components if any(a in f.actions for a in actions for f in c.intent_filters)
    ]


def oracle_call_graph(app):
    methods = {m.method_id: m for c in app.classes.values() for m in c.methods}
    entries = set(_naive_entries(app))

    def closure(starts):
        reach = {e for e in starts if e in methods}
        while True:
            grown = set(reach)
            for mid in reach:
                for instr in methods[mid].body:
                    grown |= _naive_targets(app, instr)
            if grown == reach:
                return reach
            reach = grown

    while True:
        reach = closure(entries)
        new = set()
        for mid in reach:
            body = methods[mid].body
            for idx, instr in enumerate(body):
                if instr.invoked_method is None:
                    continue
                called = instr.invoked_method.partition("->")[2].partition("(")[0]
                if not re.match(r"^(set\w*Listener|register\w+)$", called):
                    continue
                for prev in body[:idx]:
                    if prev.opcode.mnemonic in ("new-instance", "const-class"):
                        for op in prev.operands:
                            if op in app.classes:
                                for m in app.classes[op].methods:
                                    if m.name in DEFAULT_CALLBACKS:
                                        new.add(m.method_id)
        if new <= entries:
            break
        entries |= new

    reach = closure(entries)
    icc = set()
    for mid in sorted(reach):
        body = methods[mid].body
        for idx, instr in enumerate(body):
            if instr.invoked_method is None:
                continue
            called = instr.invoked_method.partition("->")[2].partition("(")[0]
            if called not in DEFAULT_INTENT_SENDERS:
                continue
            for comp in _naive_intent_targets(app, body, idx):
                wanted = "onReceive" if comp.category == "receiver" else "onCreate"
                for cname in _ancestry(app, comp.path_name):
                    cd = app.classes.get(cname)
                    if cd is None:
                        continue
                    hit = [m for m in cd.methods if m.name == wanted]
                    if hit:
                        icc.add((mid, hit[0].method_id))
                        break

    edge_pairs = set()
    for mid in reach:
        for instr in methods[mid].body:
            for callee in _naive_targets(app, instr):
                edge_pairs.add((mid, callee))
    return reach, edge_pairs, icc, entries & reach


# ---------------------------------------------------------------------------
# Fixture apps
# ---------------------------------------------------------------------------

def fx_linear():
    return build_app(
        [
            cls(
                "Lx/Main;",
                [
                    method("onCreate", "()V", [invoke("direct", "Lx/Main;->m2()V"), ins("return-void")]),
                    method("m2", "()V", [invoke("virtual", SMS), ins("return-void")]),
                ],
                superclass=ACT,
            )
        ],
        [component("Lx/Main;")],
    )


def fx_diamond():
    return build_app(
        [
            cls(
                "Lx/Main;",
                [
                    method("onCreate", "()V", [
                        invoke("direct", "Lx/Main;->a()V"),
                        invoke("direct", "Lx/Main;->b()V"),
                        ins("return-void"),
                    ]),
                    method("a", "()V", [invoke("direct", "Lx/Main;->m3()V"), ins("return-void")]),
                    method("b", "()V", [invoke("direct", "Lx/Main;->m3()V"), ins("return-void")]),
                    method("m3", "()V", [invoke("virtual", SMS), ins("return-void")]),
                ],
                superclass=ACT,
            )
        ],
        [component("Lx/Main;")],
    )


def fx_virtual_dispatch():
    return build_app(
        [
            cls("Lx/Base;", [method("over", "()V", [ins("return-void")])]),
            cls("Lx/Sub1;", [method("over", "()V", [ins("nop"), ins("return-void")])], superclass="Lx/Base;"),
            cls("Lx/Sub2;", [method("over", "()V", [ins("nop"), ins("nop"), ins("return-void")])], superclass="Lx/Base;"),
            cls(
                "Lx/Main;",
                [method("onCreate", "()V", [invoke("virtual", "Lx/Base;->over()V"), ins("return-void")])],
                superclass=ACT,
            ),
        ],
        [component("Lx/Main;")],
    )


def fx_inherited_lifecycle():
    return build_app(
        [
            cls("Lx/BaseAct;", [method("onCreate", "()V", [invoke("direct", "Lx/BaseAct;->init()V"), ins("return-void")]),
                                 method("init", "()V", [ins("return-void")])], superclass=ACT),
            cls("Lx/Main;", [], superclass="Lx/BaseAct;"),
        ],
        [component("Lx/Main;")],
    )


def fx_callback():
    return build_app(
        [
            cls(
                "Lx/Main;",
                [method("onCreate", "()V", [
                    ins("new-instance", "v0", "Lx/L;"),
                    invoke("virtual", SET_LISTENER, "{v1, v0}"),
                    ins("return-void"),
                ])],
                superclass=ACT,
            ),
            cls("Lx/L;", [method("onClick", "(Landroid/view/View;)V", [invoke("direct", "Lx/L;->m3()V"), ins("return-void")]),
                          method("m3", "()V", [ins("return-void")])],
                interfaces=("Landroid/view/View$OnClickListener;",)),
        ],
        [component("Lx/Main;")],
    )


def fx_two_stage_callback():
    return build_app(
        [
            cls(
                "Lx/Main;",
                [method("onCreate", "()V", [
                    ins("new-instance", "v0", "Lx/L;"),
                    invoke("virtual", SET_LISTENER, "{v1, v0}"),
                    ins("return-void"),
                ])],
                superclass=ACT,
            ),
            cls("Lx/L;", [method("onClick", "(Landroid/view/View;)V", [
                ins("new-instance", "v0", "Lx/M;"),
                invoke("virtual", SET_TOUCH, "{v1, v0}"),
                ins("return-void"),
            ])], interfaces=("Landroid/view/View$OnClickListener;",)),
            cls("Lx/M;", [method("onTouch", "(Landroid/view/View;Landroid/view/MotionEvent;)Z", [
                invoke("direct", "Lx/M;->m4()V"),
                ins("return-void"),
            ]), method("m4", "()V", [ins("return-void")])],
                interfaces=("Landroid/view/View$OnTouchListener;",)),
        ],
        [component("Lx/Main;")],
    )


def fx_explicit_icc():
    return build_app(
        [
            cls(
                "Lx/Main;",
                [method("onCreate", "()V", [
                    ins("const-class", "v0", "Lx/Second;"),
                    invoke("virtual", START_ACT, "{v1, v0}"),
                    ins("return-void"),
                ])],
                superclass=ACT,
            ),
            cls("Lx/Second;", [method("onCreate", "()V", [ins("return-void")])], superclass=ACT),
        ],
        [component("Lx/Main;"), component("Lx/Second;")],
    )


def fx_implicit_icc():
    return build_app(
        [
            cls(
                "Lx/Main;",
                [method("onCreate", "()V", [
                    ins("const-string", "v0", '"com.x.ACTION_PING"'),
                    invoke("virtual", SEND_BC, "{v1, v0}"),
                    ins("return-void"),
                ])],
                superclass=ACT,
            ),
            cls("Lx/R;", [method("onReceive", "()V", [ins("return-void")])],
                superclass="Landroid/content/BroadcastReceiver;"),
        ],
        [component("Lx/Main;"), component("Lx/R;", "receiver", actions=("com.x.ACTION_PING",))],
    )


def fx_recursion():
    return build_app(
        [
            cls(
                "Lx/Main;",
                [
                    method("onCreate", "()V", [invoke("direct", "Lx/Main;->r()V"), ins("return-void")]),
                    method("r", "()V", [
                        invoke("direct", "Lx/Main;->r()V"),
                        invoke("direct", "Lx/Main;->m3()V"),
                        ins("return-void"),
                    ]),
                    method("m3", "()V", [ins("return-void")]),
                ],
                superclass=ACT,
            )
        ],
        [component("Lx/Main;")],
    )


def fx_interface_dispatch():
    return build_app(
        [
            cls("Lx/A2;", [method("go", "()V", [ins("return-void")])], interfaces=("Lx/I;",)),
            cls("Lx/B2;", [method("go", "()V", [ins("nop"), ins("return-void")])], interfaces=("Lx/I;",)),
            cls(
                "Lx/Main;",
                [method("onCreate", "()V", [invoke("interface", "Lx/I;->go()V"), ins("return-void")])],
                superclass=ACT,
            ),
        ],
        [component("Lx/Main;")],
    )


def fx_island():
    return build_app(
        [
            cls(
                "Lx/Main;",
                [method("onCreate", "()V", [ins("return-void")])],
                superclass=ACT,
            ),
            cls("Lx/Island;", [method("never", "()V", [ins("return-void")])]),
        ],
        [component("Lx/Main;")],
    )


def fx_service_provider():
    return build_app(
        [
            cls("Lx/Svc;", [
                method("onStartCommand", "()I", [invoke("direct", "Lx/Svc;->work()V"), ins("return-void")]),
                method("work", "()V", [ins("return-void")]),
            ], superclass="Landroid/app/Service;"),
            cls("Lx/Prov;", [method("onCreate", "()Z", [ins("return-void")])],
                superclass="Landroid/content/ContentProvider;"),
        ],
        [component("Lx/Svc;", "service"), component("Lx/Prov;", "provider")],
    )


def fx_unresolved_icc():
    return build_app(
        [
            cls(
                "Lx/Main;",
                [method("onCreate", "()V", [
                    invoke("virtual", START_ACT, "{v1, v0}"),
                    ins("return-void"),
                ])],
                superclass=ACT,
            ),
            cls("Lx/Second;", [method("onCreate", "()V", [ins("return-void")])], superclass=ACT),
        ],
        [component("Lx/Main;"), component("Lx/Second;")],
    )


def fx_super_call():
    return build_app(
        [
            cls("Lx/BaseAct;", [method("onCreate", "()V", [ins("return-void")])], superclass=ACT),
            cls("Lx/Main;", [method("onCreate", "()V", [
                invoke("super", "Lx/BaseAct;->onCreate()V", "{p0}"),
                ins("return-void"),
            ])], superclass="Lx/BaseAct;"),
        ],
        [component("Lx/Main;")],
    )


ALL_FIXTURES = [
    fx_linear, fx_diamond, fx_virtual_dispatch, fx_inherited_lifecycle,
    fx_callback, fx_two_stage_callback, fx_explicit_icc, fx_implicit_icc,
    fx_recursion, fx_interface_dispatch, fx_island, fx_service_provider,
    fx_unresolved_icc, fx_super_call,
]


# ---------------------------------------------------------------------------
# Unit behavior
# ---------------------------------------------------------------------------

def test_hierarchy_maps():
    app = build_app(
        [cls("Lx/B;"), cls("Lx/A;", superclass="Lx/B;")], []
    )
    h = build_class_hierarchy(app)
    assert h.parent["Lx/A;"] == "Lx/B;"
    assert h.subclasses["Lx/B;"] == ("Lx/A;",)


def test_cyclic_hierarchy_rejected():
    app = build_app(
        [cls("Lx/A;", superclass="Lx/B;"), cls("Lx/B;", superclass="Lx/A;")], []
    )
    with pytest.raises(CyclicHierarchyError):
        build_class_hierarchy(app)


def test_implements_recorded():
    app = build_app([cls("Lx/L;", interfaces=("Landroid/view/View$OnClickListener;",))], [])
    h = build_class_hierarchy(app)
    assert "Landroid/view/View$OnClickListener;" in h.implements["Lx/L;"]


def test_entry_points_direct_and_inherited():
    app = fx_inherited_lifecycle()
    h = build_class_hierarchy(app)
    eps = collect_entry_points(app, h)
    assert "Lx/BaseAct;->onCreate()V" in eps


def test_receiver_without_overrides_contributes_nothing():
    app = build_app(
        [cls("Lx/R;", [method("helper", "()V", [ins("return-void")])])],
        [component("Lx/R;", "receiver")],
    )
    h = build_class_hierarchy(app)
    assert len(collect_entry_points(app, h)) == 0


def test_linear_graph_shape():
    cg = build_call_graph(fx_linear())
    assert set(cg.nodes) == {"Lx/Main;->onCreate()V", "Lx/Main;->m2()V"}
    assert cg.edges["Lx/Main;->onCreate()V"] == ("Lx/Main;->m2()V",)
    assert cg.icc_edges == ()


def test_callback_fixed_point():
    cg = build_call_graph(fx_callback())
    assert "Lx/L;->onClick(Landroid/view/View;)V" in cg.entry_points
    assert "Lx/L;->m3()V" in cg.nodes
    # re-running the scan on the final graph adds nothing: builder already at fixed point
    again = build_call_graph(fx_callback())
    assert again.nodes == cg.nodes and again.entry_points.entries == cg.entry_points.entries


def test_callee_order_matches_instruction_order():
    cg = build_call_graph(fx_diamond())
    assert cg.edges["Lx/Main;->onCreate()V"] == ("Lx/Main;->a()V", "Lx/Main;->b()V")


def test_dump_edges_format():
    cg = build_call_graph(fx_explicit_icc())
    lines = cg.dump_edges().splitlines()
    assert "Lx/Main;->onCreate()V\tLx/Second;->onCreate()V\ticc" in lines
    for line in lines:
        parts = line.split("\t")
        assert len(parts) == 3 and parts[2] in ("call", "icc")


def test_explicit_icc_edge():
    cg = build_call_graph(fx_explicit_icc())
    assert ("Lx/Main;->onCreate()V", "Lx/Second;->onCreate()V") in cg.icc_edges


def test_implicit_icc_edge():
    cg = build_call_graph(fx_implicit_icc())
    assert ("Lx/Main;->onCreate()V", "Lx/R;->onReceive()V") in cg.icc_edges


def test_unresolved_icc_is_diagnostic():
    cg = build_call_graph(fx_unresolved_icc())
    assert cg.icc_edges == ()
    assert any("unresolved intent" in d for d in cg.diagnostics)


def test_island_method_not_reachable():
    cg = build_call_graph(fx_island())
    assert "Lx/Island;->never()V" not in cg.nodes


def test_determinism():
    for fx in ALL_FIXTURES:
        a = build_call_graph(fx())
        b = build_call_graph(fx())
        assert a.nodes == b.nodes
        assert a.edges == b.edges
        assert a.icc_edges == b.icc_edges
        assert a.entry_points.entries == b.entry_points.entries


def test_virtual_dispatch_monotone_under_new_override():
    base = build_call_graph(fx_virtual_dispatch())
    extended = build_app(
        [
            cls("Lx/Base;", [method("over", "()V", [ins("return-void")])]),
            cls("Lx/Sub1;", [method("over", "()V", [ins("nop"), ins("return-void")])], superclass="Lx/Base;"),
            cls("Lx/Sub2;", [method("over", "()V", [ins("nop"), ins("nop"), ins("return-void")])], superclass="Lx/Base;"),
            cls("Lx/Sub3;", [method("over", "()V", [ins("return-void")])], superclass="Lx/Base;"),
            cls(
                "Lx/Main;",
                [method("onCreate", "()V", [invoke("virtual", "Lx/Base;->over()V"), ins("return-void")])],
                superclass=ACT,
            ),
        ],
        [component("Lx/Main;")],
    )
    bigger = build_call_graph(extended)
    base_edges = {(c, t) for c, ts in base.edges.items() for t in ts}
    bigger_edges = {(c, t) for c, ts in bigger.edges.items() for t in ts}
    assert base_edges <= bigger_edges


# ---------------------------------------------------------------------------
# Oracle equivalence over every fixture (acceptance criterion backbone)
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("fx", ALL_FIXTURES, ids=lambda f: f.__name__)
def test_matches_brute_force_reference(fx):
    app = fx()
    cg = build_call_graph(app)
    nodes, edges, icc, entries = oracle_call_graph(app)
    got_edges = {(c, t) for c, ts in cg.edges.items() for t in ts}
    assert set(cg.nodes) == nodes
    assert got_edges == edges
    assert set(cg.icc_edges) == icc
    assert set(cg.entry_points) == entries
