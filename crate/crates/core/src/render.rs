//! Deterministic FaceState → 2-D vector scene graph, plus SVG text output.
//!
//! All layout constants live in [`Geometry`]. Units are millimetres of the
//! display surface. The iris and sclera sizes match the physical pupil
//! model so a pupil fraction of 0.25 draws an 11.25 mm pupil.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::RenderError;
use crate::face::FaceState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    /// Brows, lids, eyes, pupils and mouth on a face plate.
    #[default]
    HybridFull,
    /// Eyes, lids and pupils on a dark screen; no mouth, no brows.
    EyesOnly,
}

/// Which facial feature a primitive belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Decoration,
    Brow,
    Sclera,
    Iris,
    Pupil,
    Lid,
    Mouth,
}

impl Part {
    fn as_str(self) -> &'static str {
        match self {
            Part::Decoration => "decoration",
            Part::Brow => "brow",
            Part::Sclera => "sclera",
            Part::Iris => "iris",
            Part::Pupil => "pupil",
            Part::Lid => "lid",
            Part::Mouth => "mouth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

const fn pt(x: f64, y: f64) -> Point {
    Point { x, y }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
    },
    Circle {
        cx: f64,
        cy: f64,
        r: f64,
    },
    RoundedRect {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
        radius: f64,
    },
    Cubic {
        from: Point,
        ctrl1: Point,
        ctrl2: Point,
        to: Point,
    },
    Line {
        from: Point,
        to: Point,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub color: Rgb,
    pub width: f64,
}

/// Rotation in degrees (clockwise on screen) about a pivot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub degrees: f64,
    pub pivot: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub id: String,
    pub part: Part,
    pub shape: Shape,
    pub rotation: Option<Rotation>,
    pub fill: Option<Rgb>,
    pub stroke: Option<Stroke>,
    pub z: u32,
}

impl Primitive {
    /// Axis-aligned bounds `(min_x, min_y, max_x, max_y)` including rotation
    /// and stroke. Curves use their control hull.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let rot = |p: Point| match self.rotation {
            Some(r) => rotate(p, r),
            None => p,
        };
        let mut pts: Vec<Point> = Vec::with_capacity(4);
        let mut extra = 0.0;
        match self.shape {
            Shape::Circle { cx, cy, r } => {
                let c = rot(pt(cx, cy));
                pts.push(c);
                extra = r;
            }
            Shape::Ellipse { cx, cy, rx, ry } => {
                let c = rot(pt(cx, cy));
                let theta = self.rotation.map_or(0.0, |r| r.degrees.to_radians());
                let (s, co) = theta.sin_cos();
                let hx = ((rx * co).powi(2) + (ry * s).powi(2)).sqrt();
                let hy = ((rx * s).powi(2) + (ry * co).powi(2)).sqrt();
                pts.push(pt(c.x - hx, c.y - hy));
                pts.push(pt(c.x + hx, c.y + hy));
            }
            Shape::RoundedRect {
                x, y, width, height, ..
            } => {
                for p in [pt(x, y), pt(x + width, y), pt(x, y + height), pt(x + width, y + height)] {
                    pts.push(rot(p));
                }
            }
            Shape::Cubic { from, ctrl1, ctrl2, to } => {
                pts.extend([from, ctrl1, ctrl2, to].map(rot));
            }
            Shape::Line { from, to } => pts.extend([from, to].map(rot)),
        }
        extra += self.stroke.map_or(0.0, |s| s.width / 2.0);
        let min_x = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - extra;
        let min_y = pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - extra;
        let max_x = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + extra;
        let max_y = pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + extra;
        (min_x, min_y, max_x, max_y)
    }
}

fn rotate(p: Point, r: Rotation) -> Point {
    let (s, c) = r.degrees.to_radians().sin_cos();
    let dx = p.x - r.pivot.x;
    let dy = p.y - r.pivot.y;
    pt(r.pivot.x + dx * c - dy * s, r.pivot.y + dx * s + dy * c)
}

/// Ordered drawing list on a fixed canvas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub width: f64,
    pub height: f64,
    pub mode: RenderMode,
    /// Sorted by ascending `z`; `z` values are unique.
    pub primitives: Vec<Primitive>,
}

impl SceneGraph {
    pub fn empty(width: f64, height: f64, mode: RenderMode) -> SceneGraph {
        SceneGraph {
            width,
            height,
            mode,
            primitives: Vec::new(),
        }
    }

    pub fn count_part(&self, part: Part) -> usize {
        self.primitives.iter().filter(|p| p.part == part).count()
    }

    pub fn find(&self, id: &str) -> Option<&Primitive> {
        self.primitives.iter().find(|p| p.id == id)
    }

    /// Checks that every primitive lies inside the canvas.
    pub fn check_bounds(&self) -> Result<(), RenderError> {
        for p in &self.primitives {
            let (x0, y0, x1, y1) = p.bounds();
            if x0 < 0.0 || y0 < 0.0 || x1 > self.width || y1 > self.height {
                return Err(RenderError::OutOfBounds { id: p.id.clone() });
            }
        }
        Ok(())
    }

    fn push(&mut self, id: impl Into<String>, part: Part, shape: Shape) -> &mut Primitive {
        let z = self.primitives.len() as u32;
        self.primitives.push(Primitive {
            id: id.into(),
            part,
            shape,
            rotation: None,
            fill: None,
            stroke: None,
            z,
        });
        self.primitives.last_mut().expect("just pushed")
    }
}

impl Primitive {
    fn fill(&mut self, c: Rgb) -> &mut Self {
        self.fill = Some(c);
        self
    }

    fn stroke(&mut self, color: Rgb, width: f64) -> &mut Self {
        self.stroke = Some(Stroke { color, width });
        self
    }

    fn rotate(&mut self, degrees: f64, pivot: Point) -> &mut Self {
        if degrees != 0.0 {
            self.rotation = Some(Rotation { degrees, pivot });
        }
        self
    }
}

/// Layout table. Everything except the iris and sclera diameters is a
/// free styling choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub canvas_width: f64,
    pub canvas_height: f64,
    pub iris_diameter: f64,
    pub sclera_diameter: f64,
    /// Eye centres in hybrid mode.
    pub eye_left: Point,
    pub eye_right: Point,
    /// Eye centres in eyes-only mode.
    pub screen_eye_left: Point,
    pub screen_eye_right: Point,
    /// Margin the lid extends past the sclera.
    pub lid_margin: f64,
    pub brow_length: f64,
    pub brow_gap: f64,
    pub brow_height_travel: f64,
    pub brow_max_degrees: f64,
    pub brow_stroke: f64,
    pub mouth_center: Point,
    pub mouth_min_half_width: f64,
    pub mouth_width_travel: f64,
    pub mouth_corner_travel: f64,
    pub lip_top_travel: f64,
    pub lip_bottom_travel: f64,
    pub mouth_stroke: f64,
    /// Sclera growth per unit of (positive) brow height in eyes-only mode.
    pub screen_eye_scale: f64,
    /// Lid slant per unit of brow angle in eyes-only mode.
    pub screen_lid_max_degrees: f64,
}

pub const GEOMETRY: Geometry = Geometry {
    canvas_width: 400.0,
    canvas_height: 320.0,
    iris_diameter: 45.0,
    sclera_diameter: 85.0,
    eye_left: pt(125.0, 135.0),
    eye_right: pt(275.0, 135.0),
    screen_eye_left: pt(125.0, 160.0),
    screen_eye_right: pt(275.0, 160.0),
    lid_margin: 3.0,
    brow_length: 70.0,
    brow_gap: 18.0,
    brow_height_travel: 14.0,
    brow_max_degrees: 25.0,
    brow_stroke: 6.0,
    mouth_center: pt(200.0, 255.0),
    mouth_min_half_width: 30.0,
    mouth_width_travel: 40.0,
    mouth_corner_travel: 18.0,
    lip_top_travel: 16.0,
    lip_bottom_travel: 20.0,
    mouth_stroke: 4.0,
    screen_eye_scale: 0.25,
    screen_lid_max_degrees: 20.0,
};

const SKIN: Rgb = Rgb(0xf2, 0xd6, 0xc4);
const SKIN_EDGE: Rgb = Rgb(0xc9, 0xa4, 0x8e);
const SCREEN: Rgb = Rgb(0x10, 0x18, 0x20);
const SCLERA: Rgb = Rgb(0xff, 0xff, 0xff);
const SCLERA_EDGE: Rgb = Rgb(0x9a, 0x8a, 0x80);
const IRIS: Rgb = Rgb(0x6f, 0xa8, 0xdc);
const PUPIL: Rgb = Rgb(0x00, 0x00, 0x00);
const BROW: Rgb = Rgb(0x4a, 0x34, 0x26);
const LIPS: Rgb = Rgb(0x8e, 0x3b, 0x3b);

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

impl Side {
    fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    /// Screen rotation sign that drops the inner (nose-side) end of the
    /// feature for a negative angle.
    fn inner_down_sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

struct EyeParams {
    side: Side,
    center: Point,
    lid_open: f64,
    sclera_scale: f64,
    lid_degrees: f64,
    lid_color: Rgb,
    sclera_stroke: Option<Stroke>,
}

/// Maps a face state to a scene graph.
pub fn render(state: &FaceState, mode: RenderMode) -> Result<SceneGraph, RenderError> {
    render_with(state, mode, &GEOMETRY)
}

pub fn render_with(state: &FaceState, mode: RenderMode, g: &Geometry) -> Result<SceneGraph, RenderError> {
    state.validate()?;
    let mut scene = SceneGraph::empty(g.canvas_width, g.canvas_height, mode);
    match mode {
        RenderMode::HybridFull => {
            scene
                .push(
                    "faceplate",
                    Part::Decoration,
                    Shape::RoundedRect {
                        x: 10.0,
                        y: 10.0,
                        width: g.canvas_width - 20.0,
                        height: g.canvas_height - 20.0,
                        radius: 60.0,
                    },
                )
                .fill(SKIN)
                .stroke(SKIN_EDGE, 2.0);
            let c = g.canvas_width / 2.0;
            scene
                .push(
                    "nose",
                    Part::Decoration,
                    Shape::Cubic {
                        from: pt(c - 2.0, 165.0),
                        ctrl1: pt(c - 10.0, 195.0),
                        ctrl2: pt(c - 12.0, 208.0),
                        to: pt(c + 6.0, 210.0),
                    },
                )
                .stroke(SKIN_EDGE, 2.0);
            let stroke = Some(Stroke {
                color: SCLERA_EDGE,
                width: 1.5,
            });
            for (side, center, lid) in [
                (Side::Left, g.eye_left, state.lid_open_left),
                (Side::Right, g.eye_right, state.lid_open_right),
            ] {
                let eye = EyeParams {
                    side,
                    center,
                    lid_open: lid,
                    sclera_scale: 1.0,
                    lid_degrees: 0.0,
                    lid_color: SKIN,
                    sclera_stroke: stroke,
                };
                draw_eye(&mut scene, state, &eye, g);
            }
            draw_brows(&mut scene, state, g);
            draw_mouth(&mut scene, state, g);
        }
        RenderMode::EyesOnly => {
            scene
                .push(
                    "screen",
                    Part::Decoration,
                    Shape::RoundedRect {
                        x: 10.0,
                        y: 10.0,
                        width: g.canvas_width - 20.0,
                        height: g.canvas_height - 20.0,
                        radius: 80.0,
                    },
                )
                .fill(SCREEN);
            let lift = ((state.brow_height_left + state.brow_height_right) / 2.0).max(0.0);
            let scale = 1.0 + g.screen_eye_scale * lift;
            for (side, center, lid, brow) in [
                (
                    Side::Left,
                    g.screen_eye_left,
                    state.lid_open_left,
                    state.brow_angle_left,
                ),
                (
                    Side::Right,
                    g.screen_eye_right,
                    state.lid_open_right,
                    state.brow_angle_right,
                ),
            ] {
                let eye = EyeParams {
                    side,
                    center,
                    lid_open: lid,
                    sclera_scale: scale,
                    lid_degrees: side.inner_down_sign() * brow * g.screen_lid_max_degrees,
                    lid_color: SCREEN,
                    sclera_stroke: None,
                };
                draw_eye(&mut scene, state, &eye, g);
            }
        }
    }
    Ok(scene)
}

fn draw_eye(scene: &mut SceneGraph, state: &FaceState, eye: &EyeParams, g: &Geometry) {
    let side = eye.side.name();
    let r_sclera = g.sclera_diameter / 2.0 * eye.sclera_scale;
    let r_iris = g.iris_diameter / 2.0;
    let c = eye.center;

    let sclera = scene.push(
        format!("sclera-{side}"),
        Part::Sclera,
        Shape::Circle {
            cx: c.x,
            cy: c.y,
            r: r_sclera,
        },
    );
    sclera.fill(SCLERA);
    sclera.stroke = eye.sclera_stroke;

    if eye.lid_open > 0.0 {
        // Gaze vector limited to the unit disc keeps the iris inside the sclera.
        let travel = r_sclera - r_iris;
        let norm = state.eye_yaw.hypot(state.eye_pitch).max(1.0);
        let ic = pt(
            c.x + travel * state.eye_yaw / norm,
            c.y - travel * state.eye_pitch / norm,
        );
        scene
            .push(
                format!("iris-{side}"),
                Part::Iris,
                Shape::Circle {
                    cx: ic.x,
                    cy: ic.y,
                    r: r_iris,
                },
            )
            .fill(IRIS);
        scene
            .push(
                format!("pupil-{side}"),
                Part::Pupil,
                Shape::Circle {
                    cx: ic.x,
                    cy: ic.y,
                    r: state.pupil * g.iris_diameter / 2.0,
                },
            )
            .fill(PUPIL);
    }

    let m = g.lid_margin;
    let span = 2.0 * r_sclera + m;
    scene
        .push(
            format!("lid-{side}"),
            Part::Lid,
            Shape::RoundedRect {
                x: c.x - r_sclera - m,
                y: c.y - r_sclera - m,
                width: 2.0 * (r_sclera + m),
                height: m + (1.0 - eye.lid_open) * span,
                radius: 0.0,
            },
        )
        .fill(eye.lid_color)
        .rotate(eye.lid_degrees, c);
}

fn draw_brows(scene: &mut SceneGraph, state: &FaceState, g: &Geometry) {
    for (side, eye, angle, height) in [
        (Side::Left, g.eye_left, state.brow_angle_left, state.brow_height_left),
        (
            Side::Right,
            g.eye_right,
            state.brow_angle_right,
            state.brow_height_right,
        ),
    ] {
        let cy = eye.y - g.sclera_diameter / 2.0 - g.brow_gap - height * g.brow_height_travel;
        let half = g.brow_length / 2.0;
        let center = pt(eye.x, cy);
        scene
            .push(
                format!("brow-{}", side.name()),
                Part::Brow,
                Shape::Line {
                    from: pt(eye.x - half, cy),
                    to: pt(eye.x + half, cy),
                },
            )
            .stroke(BROW, g.brow_stroke)
            .rotate(side.inner_down_sign() * angle * g.brow_max_degrees, center);
    }
}

fn draw_mouth(scene: &mut SceneGraph, state: &FaceState, g: &Geometry) {
    let c = g.mouth_center;
    let hw = g.mouth_min_half_width + state.mouth_width * g.mouth_width_travel;
    let corner_y = c.y - state.mouth_corner_height * g.mouth_corner_travel;
    let left = pt(c.x - hw, corner_y);
    let right = pt(c.x + hw, corner_y);
    let top_y = c.y - state.lip_open_top * g.lip_top_travel;
    let bottom_y = c.y + state.lip_open_bottom * g.lip_bottom_travel;
    scene
        .push(
            "mouth-upper",
            Part::Mouth,
            Shape::Cubic {
                from: left,
                ctrl1: pt(c.x - hw / 3.0, top_y),
                ctrl2: pt(c.x + hw / 3.0, top_y),
                to: right,
            },
        )
        .stroke(LIPS, g.mouth_stroke);
    scene
        .push(
            "mouth-lower",
            Part::Mouth,
            Shape::Cubic {
                from: left,
                ctrl1: pt(c.x - hw / 3.0, bottom_y),
                ctrl2: pt(c.x + hw / 3.0, bottom_y),
                to: right,
            },
        )
        .stroke(LIPS, g.mouth_stroke);
}

fn num(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

/// Serializes a scene as an SVG document with fixed 6-decimal numbers.
pub fn to_vector_text(scene: &SceneGraph) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}mm\" height=\"{h}mm\" viewBox=\"0 0 {w} {h}\">",
        w = num(scene.width),
        h = num(scene.height)
    );
    let mut ordered: Vec<&Primitive> = scene.primitives.iter().collect();
    ordered.sort_by_key(|p| p.z);
    for p in ordered {
        let _ = writeln!(out, "  {}", element(p));
    }
    out.push_str("</svg>\n");
    out
}

fn element(p: &Primitive) -> String {
    let mut attrs = format!("id=\"{}\" data-part=\"{}\"", p.id, p.part.as_str());
    let body = match p.shape {
        Shape::Circle { cx, cy, r } => {
            format!("circle cx=\"{}\" cy=\"{}\" r=\"{}\"", num(cx), num(cy), num(r))
        }
        Shape::Ellipse { cx, cy, rx, ry } => format!(
            "ellipse cx=\"{}\" cy=\"{}\" rx=\"{}\" ry=\"{}\"",
            num(cx),
            num(cy),
            num(rx),
            num(ry)
        ),
        Shape::RoundedRect {
            x,
            y,
            width,
            height,
            radius,
        } => format!(
            "rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" rx=\"{}\"",
            num(x),
            num(y),
            num(width),
            num(height),
            num(radius)
        ),
        Shape::Cubic { from, ctrl1, ctrl2, to } => format!(
            "path d=\"M {} {} C {} {} {} {} {} {}\"",
            num(from.x),
            num(from.y),
            num(ctrl1.x),
            num(ctrl1.y),
            num(ctrl2.x),
            num(ctrl2.y),
            num(to.x),
            num(to.y)
        ),
        Shape::Line { from, to } => format!(
            "line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"",
            num(from.x),
            num(from.y),
            num(to.x),
            num(to.y)
        ),
    };
    let fill = p.fill.map_or_else(|| "none".to_string(), Rgb::hex);
    let _ = write!(attrs, " fill=\"{fill}\"");
    if let Some(s) = p.stroke {
        let _ = write!(
            attrs,
            " stroke=\"{}\" stroke-width=\"{}\" stroke-linecap=\"round\"",
            s.color.hex(),
            num(s.width)
        );
    }
    if let Some(r) = p.rotation {
        let _ = write!(
            attrs,
            " transform=\"rotate({} {} {})\"",
            num(r.degrees),
            num(r.pivot.x),
            num(r.pivot.y)
        );
    }
    format!("<{body} {attrs}/>")
}
