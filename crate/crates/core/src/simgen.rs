//! Deterministic synthetic pen scenarios with exact ground truth.
//!
//! Agents are filled ellipses, each with its own gray level, wandering
//! between random waypoints inside a private cell of a grid laid over the
//! pen so that they never touch unless an event brings them together.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{Instance, PenConfig, PenRegion};
use crate::image::GrayImage;
use crate::mask::BitMask;
use crate::pipeline::{Clip, FrameRecord, ImageRef};
use crate::track::Track;

/// Hand-placed agent. Waypoints are visited in a loop; without waypoints the
/// agent stands still.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    #[serde(default)]
    pub angle_deg: f64,
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default)]
    pub gray: Option<f32>,
}

fn default_speed() -> f64 {
    1.0
}

/// Scripted event. Agents are referred to by identity (1-based), frames are
/// global and ranges inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    /// `hidden` slides under `occluder` and is invisible on `start..=end`.
    Occlusion {
        occluder: u32,
        hidden: u32,
        start: u64,
        end: u64,
    },
    /// The agent vanishes and later reappears where it left.
    Disappearance { agent: u32, start: u64, end: u64 },
    /// The agents crowd together; their detections merge into one.
    PileUp {
        agents: Vec<u32>,
        start: u64,
        end: u64,
        /// Remaining fraction of the distance to the group centre.
        #[serde(default = "default_tightness")]
        tightness: f64,
    },
    /// The agent walks out through the nearest pen side and back.
    ExitPen { agent: u32, start: u64, end: u64 },
}

fn default_tightness() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_agents: usize,
    /// `[width, height]`
    pub frame_size: [u32; 2],
    pub n_clips: usize,
    pub frames_per_clip: usize,
    /// Distance from the frame border to the pen rectangle.
    pub pen_inset: f64,
    pub semi_major: [f64; 2],
    pub semi_minor: [f64; 2],
    /// px/frame
    pub speed: [f64; 2],
    pub confidence: [f64; 2],
    pub background: f32,
    /// Frames used to move into and out of an event.
    pub ramp: u64,
    /// Overrides the random grid layout when nonempty.
    pub agents: Vec<AgentSpec>,
    pub events: Vec<EventSpec>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_agents: 10,
            frame_size: [480, 360],
            n_clips: 3,
            frames_per_clip: 200,
            pen_inset: 10.0,
            semi_major: [14.0, 20.0],
            semi_minor: [9.0, 13.0],
            speed: [0.5, 1.5],
            confidence: [0.5, 0.95],
            background: 0.15,
            ramp: 10,
            agents: Vec::new(),
            events: Vec::new(),
        }
    }
}

/// Generated frames, ground truth and the pen they live in.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub clips: Vec<Clip>,
    pub gt: Vec<Track>,
    pub pen: PenRegion,
    pub pen_config: PenConfig,
}

/// Gray levels that stay in distinct 16-bin histogram cells after the
/// default 0.6 gamma used for re-identification.
fn gray_level(i: usize) -> f32 {
    let bin = 6 + (i * 7) % 10;
    (((bin as f64 + 0.5) / 16.0).powf(1.0 / 0.6)) as f32
}

#[derive(Debug, Clone)]
struct Agent {
    pos: [f64; 2],
    a: f64,
    b: f64,
    angle: f64,
    speed: f64,
    gray: f32,
    /// Random waypoints are drawn from this box when set.
    region: Option<[f64; 4]>,
    route: Vec<[f64; 2]>,
    next: usize,
    target: [f64; 2],
}

impl Agent {
    fn step(&mut self, rng: &mut ChaCha8Rng) {
        let (dx, dy) = (self.target[0] - self.pos[0], self.target[1] - self.pos[1]);
        let d = dx.hypot(dy);
        if d <= self.speed {
            self.pos = self.target;
            if let Some(r) = self.region {
                self.target = [rng.gen_range(r[0]..=r[2]), rng.gen_range(r[1]..=r[3])];
            } else if !self.route.is_empty() {
                self.next = (self.next + 1) % self.route.len();
                self.target = self.route[self.next];
            }
        } else {
            self.pos[0] += dx / d * self.speed;
            self.pos[1] += dy / d * self.speed;
        }
    }

    fn raster(&self, at: [f64; 2], w: u32, h: u32) -> BitMask {
        let r = self.a.max(self.b);
        let x0 = (at[0] - r - 1.0).floor().max(0.0) as u32;
        let y0 = (at[1] - r - 1.0).floor().max(0.0) as u32;
        let x1 = ((at[0] + r + 1.0).ceil().max(0.0) as u32).min(w);
        let y1 = ((at[1] + r + 1.0).ceil().max(0.0) as u32).min(h);
        let (s, c) = self.angle.sin_cos();
        let mut px = Vec::new();
        for y in y0..y1 {
            for x in x0..x1 {
                let dx = x as f64 + 0.5 - at[0];
                let dy = y as f64 + 0.5 - at[1];
                let u = (dx * c + dy * s) / self.a;
                let v = (-dx * s + dy * c) / self.b;
                if u * u + v * v <= 1.0 {
                    px.push((x, y));
                }
            }
        }
        BitMask::from_pixels(w, h, px)
    }
}

/// Weight in [0, 1] of an event active on `start..=end`, ramping linearly
/// over `ramp` frames on both sides.
fn event_weight(t: u64, start: u64, end: u64, ramp: u64) -> f64 {
    if (start..=end).contains(&t) {
        return 1.0;
    }
    if ramp == 0 {
        return 0.0;
    }
    let dist = if t < start { start - t } else { t - end };
    if dist >= ramp {
        0.0
    } else {
        1.0 - dist as f64 / ramp as f64
    }
}

fn lerp(a: [f64; 2], b: [f64; 2], w: f64) -> [f64; 2] {
    [a[0] + (b[0] - a[0]) * w, a[1] + (b[1] - a[1]) * w]
}

fn check_agent(spec: &ScenarioSpec, id: u32) -> Result<usize> {
    let n = if spec.agents.is_empty() {
        spec.n_agents
    } else {
        spec.agents.len()
    };
    if id == 0 || id as usize > n {
        return Err(Error::Scenario(format!("event refers to unknown agent {id}")));
    }
    Ok(id as usize - 1)
}

fn check_range(r: [f64; 2], what: &str) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] > 0.0 && r[0] <= r[1]) {
        return Err(Error::Scenario(format!("{what} range must be positive and ordered")));
    }
    Ok(())
}

fn build_agents(spec: &ScenarioSpec, rng: &mut ChaCha8Rng, pen: [f64; 4]) -> Result<Vec<Agent>> {
    if !spec.agents.is_empty() {
        return spec
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if !(a.semi_axes[0] > 0.0 && a.semi_axes[1] > 0.0 && a.speed >= 0.0) {
                    return Err(Error::Scenario(format!("agent {} has invalid shape or speed", i + 1)));
                }
                let route = a.waypoints.clone();
                Ok(Agent {
                    pos: a.center,
                    a: a.semi_axes[0],
                    b: a.semi_axes[1],
                    angle: a.angle_deg.to_radians(),
                    speed: a.speed,
                    gray: a.gray.unwrap_or_else(|| gray_level(i)),
                    region: None,
                    target: route.first().copied().unwrap_or(a.center),
                    next: 0,
                    route,
                })
            })
            .collect();
    }

    let n = spec.n_agents;
    if n == 0 {
        return Err(Error::Scenario("at least one agent required".into()));
    }
    check_range(spec.semi_major, "semi_major")?;
    check_range(spec.semi_minor, "semi_minor")?;
    check_range(spec.speed, "speed")?;
    let (pw, ph) = (pen[2] - pen[0], pen[3] - pen[1]);
    let rows = ((n as f64 * ph / pw).sqrt().floor() as usize).clamp(1, n);
    let cols = n.div_ceil(rows);
    let (cw, ch) = (pw / cols as f64, ph / rows as f64);
    let margin = spec.semi_major[1].max(spec.semi_minor[1]) + 2.0;
    if cw < 2.0 * margin || ch < 2.0 * margin {
        return Err(Error::Scenario(format!(
            "{n} agents with semi-axis up to {} do not fit in a {cols}x{rows} grid of {cw:.0}x{ch:.0} cells",
            margin - 2.0
        )));
    }
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let (r, c) = (i / cols, i % cols);
        let region = [
            pen[0] + c as f64 * cw + margin,
            pen[1] + r as f64 * ch + margin,
            pen[0] + (c + 1) as f64 * cw - margin,
            pen[1] + (r + 1) as f64 * ch - margin,
        ];
        let major = rng.gen_range(spec.semi_major[0]..=spec.semi_major[1]);
        let minor = rng.gen_range(spec.semi_minor[0]..=spec.semi_minor[1]).min(major);
        let angle = rng.gen_range(0.0..std::f64::consts::PI);
        let speed = rng.gen_range(spec.speed[0]..=spec.speed[1]);
        let pos = [rng.gen_range(region[0]..=region[2]), rng.gen_range(region[1]..=region[3])];
        let target = [rng.gen_range(region[0]..=region[2]), rng.gen_range(region[1]..=region[3])];
        agents.push(Agent {
            pos,
            a: major,
            b: minor,
            angle,
            speed,
            gray: gray_level(i),
            region: Some(region),
            route: Vec::new(),
            next: 0,
            target,
        });
    }
    Ok(agents)
}

pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    let [w, h] = spec.frame_size;
    let inset = spec.pen_inset;
    if w == 0 || h == 0 || inset.is_nan() || inset < 0.0 || 2.0 * inset >= w.min(h) as f64 {
        return Err(Error::Scenario("frame too small for the pen inset".into()));
    }
    if spec.n_clips == 0 || spec.frames_per_clip == 0 {
        return Err(Error::Scenario("need at least one clip with one frame".into()));
    }
    let c = spec.confidence;
    if !(0.0 <= c[0] && c[0] <= c[1] && c[1] <= 1.0) {
        return Err(Error::Scenario("confidence range must lie in [0, 1]".into()));
    }
    let pen_box = [inset, inset, w as f64 - inset, h as f64 - inset];
    let polygon = vec![
        [pen_box[0], pen_box[1]],
        [pen_box[2], pen_box[1]],
        [pen_box[2], pen_box[3]],
        [pen_box[0], pen_box[3]],
    ];
    let pen_config = PenConfig {
        camera_id: "sim".into(),
        polygon: polygon.clone(),
        frame_size: [w, h],
    };
    let pen = PenRegion::new(polygon, w, h)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut agents = build_agents(spec, &mut rng, pen_box)?;
    let n = agents.len();
    for ev in &spec.events {
        match ev {
            EventSpec::Occlusion { occluder, hidden, start, end } => {
                check_agent(spec, *occluder)?;
                check_agent(spec, *hidden)?;
                if occluder == hidden || start > end {
                    return Err(Error::Scenario("occlusion needs two agents and start <= end".into()));
                }
            }
            EventSpec::Disappearance { agent, start, end } | EventSpec::ExitPen { agent, start, end } => {
                check_agent(spec, *agent)?;
                if start > end {
                    return Err(Error::Scenario("event start after end".into()));
                }
            }
            EventSpec::PileUp { agents: ids, start, end, tightness } => {
                if ids.len() < 2 || start > end || !(0.0..1.0).contains(tightness) {
                    return Err(Error::Scenario(
                        "pile-up needs two or more agents, start <= end and tightness in [0, 1)".into(),
                    ));
                }
                for id in ids {
                    check_agent(spec, *id)?;
                }
            }
        }
    }

    // initial layout must be disjoint and inside the pen
    let initial: Vec<BitMask> = agents.iter().map(|a| a.raster(a.pos, w, h)).collect();
    for (i, m) in initial.iter().enumerate() {
        if m.is_empty() || !m.is_subset_of(pen.raster())? {
            return Err(Error::Scenario(format!("agent {} does not start inside the pen", i + 1)));
        }
        for (j, o) in initial.iter().enumerate().skip(i + 1) {
            if m.intersects(o)? {
                return Err(Error::Scenario(format!("agents {} and {} overlap at frame 0", i + 1, j + 1)));
            }
        }
    }

    let total = (spec.n_clips * spec.frames_per_clip) as u64;
    let mut gt: Vec<Track> = (0..n).map(|i| Track::new(i as u32 + 1)).collect();
    let mut frames = Vec::with_capacity(total as usize);
    let grays: Vec<f32> = agents.iter().map(|a| a.gray).collect();
    let background = spec.background;

    for t in 0..total {
        let mut shown: Vec<[f64; 2]> = agents.iter().map(|a| a.pos).collect();
        let mut drawn = vec![true; n];
        let mut merges: Vec<Vec<usize>> = Vec::new();
        // drawing order, bottom first
        let mut order: Vec<usize> = (0..n).collect();
        for ev in &spec.events {
            match ev {
                EventSpec::Disappearance { agent, start, end } => {
                    if (*start..=*end).contains(&t) {
                        drawn[*agent as usize - 1] = false;
                    }
                }
                EventSpec::PileUp { agents: ids, start, end, tightness } => {
                    let wgt = event_weight(t, *start, *end, spec.ramp);
                    if wgt > 0.0 {
                        let idx: Vec<usize> = ids.iter().map(|&id| id as usize - 1).collect();
                        let k = idx.len() as f64;
                        let cx = idx.iter().map(|&i| agents[i].pos[0]).sum::<f64>() / k;
                        let cy = idx.iter().map(|&i| agents[i].pos[1]).sum::<f64>() / k;
                        for &i in &idx {
                            let p = agents[i].pos;
                            let goal = [cx + tightness * (p[0] - cx), cy + tightness * (p[1] - cy)];
                            shown[i] = lerp(p, goal, wgt);
                        }
                        if (*start..=*end).contains(&t) {
                            merges.push(idx);
                        }
                    }
                }
                EventSpec::Occlusion { occluder, hidden, start, end } => {
                    let (o, hd) = (*occluder as usize - 1, *hidden as usize - 1);
                    let wgt = event_weight(t, *start, *end, spec.ramp);
                    if wgt > 0.0 {
                        shown[hd] = lerp(agents[hd].pos, agents[o].pos, wgt);
                        order.retain(|&k| k != hd);
                        let at = order.iter().position(|&k| k == o).unwrap_or(0);
                        order.insert(at, hd);
                    }
                    if (*start..=*end).contains(&t) {
                        drawn[hd] = false;
                    }
                }
                EventSpec::ExitPen { agent, start, end } => {
                    let i = *agent as usize - 1;
                    let wgt = event_weight(t, *start, *end, spec.ramp);
                    if wgt > 0.0 {
                        let p = agents[i].pos;
                        let r = agents[i].a.max(agents[i].b) + 2.0;
                        // nearest pen side, target just outside it
                        let sides = [
                            (p[0] - pen_box[0], [pen_box[0] - r, p[1]]),
                            (pen_box[2] - p[0], [pen_box[2] + r, p[1]]),
                            (p[1] - pen_box[1], [p[0], pen_box[1] - r]),
                            (pen_box[3] - p[1], [p[0], pen_box[3] + r]),
                        ];
                        let goal = sides
                            .iter()
                            .min_by(|a, b| a.0.total_cmp(&b.0))
                            .map(|s| s.1)
                            .unwrap_or(p);
                        shown[i] = lerp(p, goal, wgt);
                    }
                }
            }
        }

        // a higher identity is drawn on top unless an occlusion says otherwise
        let own: Vec<BitMask> = (0..n)
            .map(|i| {
                if drawn[i] {
                    agents[i].raster(shown[i], w, h)
                } else {
                    BitMask::new(w, h)
                }
            })
            .collect();
        let mut visible = own.clone();
        for (p, &i) in order.iter().enumerate() {
            for &j in &order[p + 1..] {
                if !visible[i].is_empty() && visible[i].intersects(&own[j])? {
                    visible[i] = visible[i].and_not(&own[j])?;
                }
            }
        }

        let foreground = BitMask::from_pixels(w, h, visible.iter().flat_map(|m| m.pixels()));
        let mut detections = Vec::new();
        let merged_members: Vec<usize> = merges.iter().flatten().copied().collect();
        for (i, m) in visible.iter().enumerate() {
            let conf = rng.gen_range(c[0]..=c[1]);
            if m.is_empty() || merged_members.contains(&i) {
                continue;
            }
            detections.push(Instance::from_mask(m.clone(), conf)?);
        }
        for group in &merges {
            let union = BitMask::from_pixels(w, h, group.iter().flat_map(|&i| visible[i].pixels()));
            if !union.is_empty() {
                let conf = rng.gen_range(c[0]..=c[1]);
                detections.push(Instance::from_mask(union, conf)?);
            }
        }

        for (track, m) in gt.iter_mut().zip(&visible) {
            track.insert(t, m.clone());
        }
        let scene: Arc<Vec<(f32, BitMask)>> = Arc::new(grays.iter().copied().zip(visible).collect());
        let render = move || {
            let mut img = GrayImage::from_fn(w, h, |_, _| background);
            for (g, m) in scene.iter() {
                for (x, y) in m.pixels() {
                    img.put(x, y, *g);
                }
            }
            img
        };
        frames.push(FrameRecord {
            index: t,
            image: ImageRef::Lazy(Arc::new(render)),
            foreground: Some(foreground),
            detections,
        });

        for (i, a) in agents.iter_mut().enumerate() {
            let paused = spec.events.iter().any(|ev| {
                matches!(ev, EventSpec::Disappearance { agent, start, end }
                    if *agent as usize - 1 == i && (*start..=*end).contains(&t))
            });
            if !paused {
                a.step(&mut rng);
            }
        }
    }

    let mut clips = Vec::with_capacity(spec.n_clips);
    let mut it = frames.into_iter();
    for k in 0..spec.n_clips {
        clips.push(Clip {
            index: k as u32,
            width: w,
            height: h,
            frames: it.by_ref().take(spec.frames_per_clip).collect(),
        });
    }
    Ok(Scenario {
        clips,
        gt,
        pen,
        pen_config,
    })
}
