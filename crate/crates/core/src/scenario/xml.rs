//! Strict scenario XML reader and writer.
//!
//! ```xml
//! <scenario name="narrowing-road">
//!   <map>town-loop</map>
//!   <start>start_b</start>
//!   <destination x="0" y="61.75"/>
//!   <weather id="0"/>
//!   <sensor_noise sigma="0"/>
//!   <obstacle lane="0" s="1150" lateral_offset="-1.25" yaw="0" length="4.5" width="2" blocking="partial"/>
//!   <traffic vehicles="0" pedestrians="0"/>
//!   <conflict id="7"/>
//! </scenario>
//! ```
//!
//! Unknown elements and attributes are errors, so typos in study configs
//! surface at load time.

use std::fmt::Write as _;
use std::str::FromStr;

use roxmltree::{Document, Node, ParsingOptions};

use super::{
    Blocking, BuiltinMaps, ConflictDecl, CutIn, MapResolver, ObstacleDecl, Pose, ScenarioError,
    ScenarioSpec, StartSpec, TrafficDecl,
};
use crate::conflicts::{InjectionAction, InjectionEvent, Trigger};
use crate::roadnet::LaneId;
use crate::supervisor::SupervisorConfig;

type Result<T> = std::result::Result<T, ScenarioError>;

/// Parses, resolves the map against the built-in maps and validates.
pub fn parse_scenario(xml: &str) -> Result<ScenarioSpec> {
    parse_scenario_with(xml, &BuiltinMaps)
}

pub fn parse_scenario_with(xml: &str, maps: &dyn MapResolver) -> Result<ScenarioSpec> {
    let spec = parse_document(xml)?;
    let net = maps.resolve(&spec.map)?;
    spec.validate(&net)?;
    Ok(spec)
}

struct Ctx<'a> {
    doc: &'a Document<'a>,
}

impl<'a> Ctx<'a> {
    fn line(&self, node: Node) -> u32 {
        self.doc.text_pos_at(node.range().start).row
    }

    fn err<T>(&self, node: Node, message: impl Into<String>) -> Result<T> {
        Err(ScenarioError::Schema {
            line: self.line(node),
            message: message.into(),
        })
    }

    fn check_attrs(&self, node: Node, allowed: &[&str]) -> Result<()> {
        for a in node.attributes() {
            if a.namespace().is_some() || !allowed.contains(&a.name()) {
                return self.err(
                    node,
                    format!(
                        "unknown attribute `{}` on <{}>",
                        a.name(),
                        node.tag_name().name()
                    ),
                );
            }
        }
        Ok(())
    }

    fn parse_attr<T: FromStr>(&self, node: Node, name: &str) -> Result<Option<T>> {
        match node.attribute(name) {
            None => Ok(None),
            Some(raw) => match raw.trim().parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(_) => self.err(
                    node,
                    format!(
                        "attribute `{name}` on <{}> has invalid value `{raw}`",
                        node.tag_name().name()
                    ),
                ),
            },
        }
    }

    fn f64_attr(&self, node: Node, name: &str) -> Result<Option<f64>> {
        match self.parse_attr::<f64>(node, name)? {
            Some(v) if !v.is_finite() => {
                self.err(node, format!("attribute `{name}` must be a finite number"))
            }
            other => Ok(other),
        }
    }

    fn req<T>(&self, node: Node, name: &str, v: Option<T>) -> Result<T> {
        match v {
            Some(v) => Ok(v),
            None => self.err(
                node,
                format!("<{}> requires attribute `{name}`", node.tag_name().name()),
            ),
        }
    }

    fn req_f64(&self, node: Node, name: &str) -> Result<f64> {
        let v = self.f64_attr(node, name)?;
        self.req(node, name, v)
    }

    fn bool_attr(&self, node: Node, name: &str) -> Result<Option<bool>> {
        match node.attribute(name).map(str::trim) {
            None => Ok(None),
            Some("true") | Some("1") => Ok(Some(true)),
            Some("false") | Some("0") => Ok(Some(false)),
            Some(raw) => self.err(
                node,
                format!("attribute `{name}` must be true or false, got `{raw}`"),
            ),
        }
    }

    /// Element children; stray text inside container elements is rejected.
    fn children(&self, node: Node<'a, 'a>) -> Result<Vec<Node<'a, 'a>>> {
        let mut out = Vec::new();
        for c in node.children() {
            if c.is_element() {
                if c.tag_name().namespace().is_some() {
                    return self.err(c, "namespaced elements are not supported");
                }
                out.push(c);
            } else if c.is_text() && !c.text().unwrap_or("").trim().is_empty() {
                return self.err(
                    c,
                    format!("unexpected text inside <{}>", node.tag_name().name()),
                );
            }
        }
        Ok(out)
    }

    fn leaf(&self, node: Node) -> Result<()> {
        if node.children().any(|c| c.is_element()) {
            return self.err(
                node,
                format!("<{}> must not contain elements", node.tag_name().name()),
            );
        }
        Ok(())
    }

    fn text(&self, node: Node) -> Result<String> {
        self.leaf(node)?;
        let t: String = node.children().filter_map(|c| c.text()).collect();
        let t = t.trim();
        if t.is_empty() {
            return self.err(
                node,
                format!("<{}> must not be empty", node.tag_name().name()),
            );
        }
        Ok(t.to_string())
    }
}

fn parse_document(xml: &str) -> Result<ScenarioSpec> {
    let opts = ParsingOptions {
        allow_dtd: false,
        ..ParsingOptions::default()
    };
    let doc = Document::parse_with_options(xml, opts).map_err(|e| {
        let pos = e.pos();
        ScenarioError::Xml {
            line: pos.row,
            col: pos.col,
            message: e.to_string(),
        }
    })?;
    let cx = Ctx { doc: &doc };
    let root = doc.root_element();
    if root.tag_name().name() != "scenario" || root.tag_name().namespace().is_some() {
        return cx.err(
            root,
            format!(
                "root element must be <scenario>, found <{}>",
                root.tag_name().name()
            ),
        );
    }
    cx.check_attrs(root, &["name"])?;
    let name = cx.req(root, "name", root.attribute("name").map(str::to_string))?;

    let mut map = None;
    let mut start = None;
    let mut spec = ScenarioSpec::new(name, String::new(), StartSpec::Spawn(String::new()));
    let mut seen: Vec<&str> = Vec::new();

    for child in cx.children(root)? {
        let tag = child.tag_name().name();
        let repeatable = matches!(tag, "obstacle" | "alternate");
        if !repeatable {
            if seen.contains(&tag) {
                return cx.err(child, format!("duplicate <{tag}>"));
            }
            seen.push(tag);
        }
        match tag {
            "map" => {
                cx.check_attrs(child, &[])?;
                map = Some(cx.text(child)?);
            }
            "start" => start = Some(parse_start(&cx, child)?),
            "alternate" => {
                cx.check_attrs(child, &[])?;
                spec.alternates.push(cx.text(child)?);
            }
            "destination" => {
                cx.check_attrs(child, &["x", "y", "theta"])?;
                cx.leaf(child)?;
                spec.destination = Some(Pose {
                    x: cx.req_f64(child, "x")?,
                    y: cx.req_f64(child, "y")?,
                    theta: cx.f64_attr(child, "theta")?.unwrap_or(0.0),
                });
            }
            "weather" => {
                cx.check_attrs(child, &["id"])?;
                cx.leaf(child)?;
                let id = cx.parse_attr::<u32>(child, "id")?;
                spec.weather_id = cx.req(child, "id", id)?;
            }
            "sensor_noise" => {
                cx.check_attrs(child, &["sigma"])?;
                cx.leaf(child)?;
                spec.sensor_noise_sigma = cx.req_f64(child, "sigma")?;
            }
            "v_ref" => {
                cx.check_attrs(child, &["value"])?;
                cx.leaf(child)?;
                spec.v_ref = cx.req_f64(child, "value")?;
            }
            "takeover" => spec.supervisor = parse_takeover(&cx, child)?,
            "obstacle" => spec.static_obstacles.push(parse_obstacle(&cx, child)?),
            "traffic" => spec.traffic = parse_traffic(&cx, child)?,
            "conflict" => spec.conflict = Some(parse_conflict(&cx, child)?),
            other => return cx.err(child, format!("unknown element <{other}>")),
        }
    }
    spec.map = match map {
        Some(m) => m,
        None => return cx.err(root, "<scenario> requires a <map>"),
    };
    spec.start = match start {
        Some(s) => s,
        None => return cx.err(root, "<scenario> requires a <start>"),
    };
    Ok(spec)
}

fn parse_start(cx: &Ctx, node: Node) -> Result<StartSpec> {
    if node.has_attribute("x") || node.has_attribute("y") || node.has_attribute("theta") {
        cx.check_attrs(node, &["x", "y", "theta"])?;
        cx.leaf(node)?;
        if node
            .children()
            .any(|c| c.is_text() && !c.text().unwrap_or("").trim().is_empty())
        {
            return cx.err(
                node,
                "<start> takes either a spawn name or x/y/theta attributes, not both",
            );
        }
        return Ok(StartSpec::Pose(Pose {
            x: cx.req_f64(node, "x")?,
            y: cx.req_f64(node, "y")?,
            theta: cx.f64_attr(node, "theta")?.unwrap_or(0.0),
        }));
    }
    cx.check_attrs(node, &[])?;
    Ok(StartSpec::Spawn(cx.text(node)?))
}

fn parse_takeover(cx: &Ctx, node: Node) -> Result<SupervisorConfig> {
    cx.check_attrs(
        node,
        &[
            "warn",
            "critical",
            "debounce",
            "budget_u1",
            "budget_u2",
            "budget_u3",
        ],
    )?;
    cx.leaf(node)?;
    let mut c = SupervisorConfig::default();
    if let Some(v) = cx.f64_attr(node, "warn")? {
        c.thresholds.warn = v;
    }
    if let Some(v) = cx.f64_attr(node, "critical")? {
        c.thresholds.critical = v;
    }
    if let Some(v) = cx.f64_attr(node, "debounce")? {
        c.thresholds.debounce = v;
    }
    for (i, key) in ["budget_u1", "budget_u2", "budget_u3"].iter().enumerate() {
        if let Some(v) = cx.f64_attr(node, key)? {
            c.budgets[i] = v;
        }
    }
    Ok(c)
}

const OBSTACLE_ATTRS: &[&str] = &[
    "lane",
    "s",
    "lateral_offset",
    "yaw",
    "length",
    "width",
    "blocking",
];

fn parse_obstacle(cx: &Ctx, node: Node) -> Result<ObstacleDecl> {
    cx.check_attrs(node, OBSTACLE_ATTRS)?;
    cx.leaf(node)?;
    let lane = cx.parse_attr::<u32>(node, "lane")?;
    let lane = LaneId(cx.req(node, "lane", lane)?);
    let blocking = match node.attribute("blocking").map(str::trim) {
        Some("partial") => Blocking::Partial,
        Some("full") => Blocking::Full,
        Some(other) => {
            return cx.err(
                node,
                format!("blocking must be partial or full, got `{other}`"),
            )
        }
        None => return cx.err(node, "<obstacle> requires attribute `blocking`"),
    };
    Ok(ObstacleDecl {
        lane,
        s: cx.req_f64(node, "s")?,
        lateral_offset: cx.f64_attr(node, "lateral_offset")?.unwrap_or(0.0),
        yaw: cx.f64_attr(node, "yaw")?.unwrap_or(0.0),
        length: cx.f64_attr(node, "length")?.unwrap_or(4.5),
        width: cx.f64_attr(node, "width")?.unwrap_or(2.0),
        blocking,
    })
}

fn parse_traffic<'a>(cx: &Ctx<'a>, node: Node<'a, 'a>) -> Result<TrafficDecl> {
    cx.check_attrs(
        node,
        &[
            "vehicles",
            "pedestrians",
            "lane",
            "s0",
            "spacing",
            "speed",
            "jitter",
        ],
    )?;
    let mut t = TrafficDecl {
        vehicles: cx.parse_attr::<u32>(node, "vehicles")?.unwrap_or(0),
        pedestrians: cx.parse_attr::<u32>(node, "pedestrians")?.unwrap_or(0),
        lane: cx.parse_attr::<u32>(node, "lane")?.map(LaneId),
        ..TrafficDecl::default()
    };
    if let Some(v) = cx.f64_attr(node, "s0")? {
        t.s0 = v;
    }
    if let Some(v) = cx.f64_attr(node, "spacing")? {
        t.spacing = v;
    }
    if let Some(v) = cx.f64_attr(node, "speed")? {
        t.speed = v;
    }
    if let Some(v) = cx.f64_attr(node, "jitter")? {
        t.jitter = v;
    }
    for c in cx.children(node)? {
        if c.tag_name().name() != "cut_in" {
            return cx.err(
                c,
                format!("unknown element <{}> in <traffic>", c.tag_name().name()),
            );
        }
        cx.check_attrs(c, &["vehicle", "t", "lane"])?;
        cx.leaf(c)?;
        let vehicle = cx.parse_attr::<u32>(c, "vehicle")?;
        let lane = cx.parse_attr::<u32>(c, "lane")?;
        t.cut_ins.push(CutIn {
            vehicle: cx.req(c, "vehicle", vehicle)?,
            t: cx.req_f64(c, "t")?,
            lane: LaneId(cx.req(c, "lane", lane)?),
        });
    }
    Ok(t)
}

fn parse_conflict<'a>(cx: &Ctx<'a>, node: Node<'a, 'a>) -> Result<ConflictDecl> {
    cx.check_attrs(node, &["id"])?;
    let id = cx.parse_attr::<u32>(node, "id")?;
    let id = cx.req(node, "id", id)?;
    let mut events = Vec::new();
    for ev in cx.children(node)? {
        if ev.tag_name().name() != "event" {
            return cx.err(
                ev,
                format!("unknown element <{}> in <conflict>", ev.tag_name().name()),
            );
        }
        cx.check_attrs(ev, &["trigger_t", "trigger_s"])?;
        let trigger = match (cx.f64_attr(ev, "trigger_t")?, cx.f64_attr(ev, "trigger_s")?) {
            (Some(t), None) => Trigger::Time(t),
            (None, Some(s)) => Trigger::Distance(s),
            _ => {
                return cx.err(
                    ev,
                    "<event> needs exactly one of `trigger_t` or `trigger_s`",
                )
            }
        };
        let actions = cx.children(ev)?;
        let [action] = actions.as_slice() else {
            return cx.err(ev, "<event> must contain exactly one action element");
        };
        events.push(InjectionEvent {
            trigger,
            action: parse_action(cx, *action)?,
        });
    }
    Ok(ConflictDecl { id, events })
}

fn parse_action(cx: &Ctx, node: Node) -> Result<InjectionAction> {
    let action = match node.tag_name().name() {
        "set_sensor_noise" => {
            cx.check_attrs(node, &["sigma"])?;
            InjectionAction::SetSensorNoise {
                sigma: cx.req_f64(node, "sigma")?,
            }
        }
        "set_sensor_failed" => {
            cx.check_attrs(node, &["value"])?;
            InjectionAction::SetSensorFailed {
                failed: cx.bool_attr(node, "value")?.unwrap_or(true),
            }
        }
        "set_weather" => {
            cx.check_attrs(node, &["id"])?;
            let id = cx.parse_attr::<u32>(node, "id")?;
            InjectionAction::SetWeather {
                id: cx.req(node, "id", id)?,
            }
        }
        "spawn_obstacle" => InjectionAction::SpawnObstacle(parse_obstacle(cx, node)?),
        other => return cx.err(node, format!("unknown action <{other}>")),
    };
    cx.leaf(node)?;
    Ok(action)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn obstacle_attrs(o: &ObstacleDecl) -> String {
    format!(
        r#"lane="{}" s="{}" lateral_offset="{}" yaw="{}" length="{}" width="{}" blocking="{}""#,
        o.lane.0,
        o.s,
        o.lateral_offset,
        o.yaw,
        o.length,
        o.width,
        o.blocking.as_str()
    )
}

/// Writes every field explicitly, so defaults survive a round trip.
pub fn serialize_scenario(spec: &ScenarioSpec) -> String {
    let mut x = String::new();
    let _ = writeln!(x, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(x, r#"<scenario name="{}">"#, escape(&spec.name));
    let _ = writeln!(x, "  <map>{}</map>", escape(&spec.map));
    match &spec.start {
        StartSpec::Spawn(n) => {
            let _ = writeln!(x, "  <start>{}</start>", escape(n));
        }
        StartSpec::Pose(p) => {
            let _ = writeln!(
                x,
                r#"  <start x="{}" y="{}" theta="{}"/>"#,
                p.x, p.y, p.theta
            );
        }
    }
    for a in &spec.alternates {
        let _ = writeln!(x, "  <alternate>{}</alternate>", escape(a));
    }
    if let Some(d) = &spec.destination {
        let _ = writeln!(
            x,
            r#"  <destination x="{}" y="{}" theta="{}"/>"#,
            d.x, d.y, d.theta
        );
    }
    let _ = writeln!(x, r#"  <weather id="{}"/>"#, spec.weather_id);
    let _ = writeln!(
        x,
        r#"  <sensor_noise sigma="{}"/>"#,
        spec.sensor_noise_sigma
    );
    let _ = writeln!(x, r#"  <v_ref value="{}"/>"#, spec.v_ref);
    let s = &spec.supervisor;
    let _ = writeln!(
        x,
        r#"  <takeover warn="{}" critical="{}" debounce="{}" budget_u1="{}" budget_u2="{}" budget_u3="{}"/>"#,
        s.thresholds.warn,
        s.thresholds.critical,
        s.thresholds.debounce,
        s.budgets[0],
        s.budgets[1],
        s.budgets[2]
    );
    for o in &spec.static_obstacles {
        let _ = writeln!(x, "  <obstacle {}/>", obstacle_attrs(o));
    }
    let t = &spec.traffic;
    let mut traffic = format!(
        r#"  <traffic vehicles="{}" pedestrians="{}""#,
        t.vehicles, t.pedestrians
    );
    if let Some(l) = t.lane {
        let _ = write!(traffic, r#" lane="{}""#, l.0);
    }
    let _ = write!(
        traffic,
        r#" s0="{}" spacing="{}" speed="{}" jitter="{}""#,
        t.s0, t.spacing, t.speed, t.jitter
    );
    if t.cut_ins.is_empty() {
        let _ = writeln!(x, "{traffic}/>");
    } else {
        let _ = writeln!(x, "{traffic}>");
        for c in &t.cut_ins {
            let _ = writeln!(
                x,
                r#"    <cut_in vehicle="{}" t="{}" lane="{}"/>"#,
                c.vehicle, c.t, c.lane.0
            );
        }
        let _ = writeln!(x, "  </traffic>");
    }
    if let Some(c) = &spec.conflict {
        if c.events.is_empty() {
            let _ = writeln!(x, r#"  <conflict id="{}"/>"#, c.id);
        } else {
            let _ = writeln!(x, r#"  <conflict id="{}">"#, c.id);
            for ev in &c.events {
                let trig = match ev.trigger {
                    Trigger::Time(t) => format!(r#"trigger_t="{t}""#),
                    Trigger::Distance(s) => format!(r#"trigger_s="{s}""#),
                };
                let action = match &ev.action {
                    InjectionAction::SetSensorNoise { sigma } => {
                        format!(r#"<set_sensor_noise sigma="{sigma}"/>"#)
                    }
                    InjectionAction::SetSensorFailed { failed } => {
                        format!(r#"<set_sensor_failed value="{failed}"/>"#)
                    }
                    InjectionAction::SetWeather { id } => format!(r#"<set_weather id="{id}"/>"#),
                    InjectionAction::SpawnObstacle(o) => {
                        format!("<spawn_obstacle {}/>", obstacle_attrs(o))
                    }
                };
                let _ = writeln!(x, "    <event {trig}>{action}</event>");
            }
            let _ = writeln!(x, "  </conflict>");
        }
    }
    x.push_str("</scenario>\n");
    x
}
