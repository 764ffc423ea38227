//! Prompt rendering for remote vision-language services and the fixed reply
//! grammar used to parse their text back into role responses.
//!
//! Reply grammar, per role:
//! - plan: one non-empty line, either an instruction or `TERMINAL`
//! - monitor: the first word of the first line is a flag keyword; the rest is
//!   the rationale
//! - reflect: `NONE`, or `CONSTRAINT <tag> | <scope> | <text>`
//! - summarize: the summary line, then `failures: <n>`

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::backend::{
    BackendError, BackendRequest, BackendResponse, MonitorResponse, PlanNext, PlanResponse,
    ReflectResponse, Role, RolePayload, SummarizeResponse, TERMINAL,
};
use crate::monitor::ProgressFlag;
use crate::reflector::ConstraintDraft;
use crate::world::Frame;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
}

pub fn frame_table(frame: &Frame) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "frame step={} camera={} gripper={} held={}",
        frame.step_index,
        frame.camera_id.as_str(),
        frame.gripper,
        frame.held.as_deref().unwrap_or("-")
    );
    let _ = writeln!(out, "| id | kind | cell | zone |");
    let _ = writeln!(out, "|----|------|------|------|");
    for o in &frame.visible_objects {
        let _ = writeln!(out, "| {} | {} | {} | {} |", o.id, o.kind, o.cell, o.zone);
    }
    if let Some(img) = &frame.image_ref {
        let _ = writeln!(out, "image: {img}");
    }
    out
}

const PLAN_SYSTEM: &str = "You plan tabletop manipulation. Reply with exactly one line: \
the next instruction for the robot, phrased as `put <item> on <zone>`, or TERMINAL when \
nothing is left to do.";
const MONITOR_SYSTEM: &str = "You watch a robot execute one instruction. Compare the older \
and newer frame. Start your reply with one of HINDER, ONGOING, FAILURE, DONE, then give a \
short reason. Respect every listed constraint.";
const REFLECT_SYSTEM: &str = "You audit the latest monitor verdict against the recorded \
frames. Reply NONE if it is right. Otherwise reply `CONSTRAINT <tag> | <scope> | <sentence>` \
with a rule that prevents the mistake.";
const SUMMARIZE_SYSTEM: &str = "Summarize how the episode went in one line, then a line \
`failures: <n>` with the number of FAILURE verdicts.";

pub fn remote_render(req: &BackendRequest) -> PromptBundle {
    let mut u = String::new();
    let system = match &req.body {
        RolePayload::Plan(p) => {
            let _ = writeln!(u, "task: {}", p.task);
            let _ = writeln!(u, "completed:");
            for c in &p.completed {
                let _ = writeln!(u, "- {}", c.text);
            }
            if !p.long_memory.is_empty() {
                let _ = writeln!(u, "past episodes:");
                for r in &p.long_memory {
                    let _ = writeln!(u, "- {} [{}] {}", r.instruction.text, r.outcome, r.summary);
                }
            }
            for h in &p.hints {
                let _ = writeln!(u, "operator hint: {h}");
            }
            for r in &p.rejected {
                let _ = writeln!(u, "not executable, do not repeat: {r}");
            }
            if !p.tools.is_empty() {
                let _ = writeln!(u, "tools:");
                for t in &p.tools {
                    let _ = writeln!(u, "- {} ({}): {}", t.name, t.category.as_str(), t.doc);
                }
            }
            u.push_str(&frame_table(&p.frame));
            PLAN_SYSTEM
        }
        RolePayload::Monitor(p) => {
            let _ = writeln!(u, "instruction: {}", p.instruction.text);
            if !p.constraints.is_empty() {
                let _ = writeln!(u, "constraints:");
                for c in &p.constraints {
                    let _ = writeln!(u, "- {}", c.text);
                }
            }
            let _ = writeln!(u, "older:");
            u.push_str(&frame_table(&p.frame_prev));
            let _ = writeln!(u, "newer:");
            u.push_str(&frame_table(&p.frame_now));
            MONITOR_SYSTEM
        }
        RolePayload::Reflect(p) => {
            if let Some(gt) = p.ground_truth_hint {
                let _ = writeln!(u, "reference judgement: {gt}");
            }
            for r in &p.short_memory_tail {
                let _ = writeln!(
                    u,
                    "record {} instruction={} verdict={} ({})",
                    r.seq, r.instruction.text, r.verdict.flag, r.verdict.rationale
                );
                u.push_str(&frame_table(&r.frame_prev));
                u.push_str(&frame_table(&r.frame_now));
            }
            REFLECT_SYSTEM
        }
        RolePayload::Summarize(p) => {
            let _ = writeln!(u, "outcome: {}", p.outcome);
            for r in &p.short_memory {
                let _ = writeln!(
                    u,
                    "window {} at step {}: {} ({})",
                    r.seq, r.verdict.step_index, r.verdict.flag, r.verdict.rationale
                );
            }
            SUMMARIZE_SYSTEM
        }
    };
    PromptBundle {
        system: system.to_string(),
        user: u,
    }
}

fn parse_error(role: Role, raw: &str) -> BackendError {
    BackendError::Parse {
        role,
        raw: raw.to_string(),
    }
}

fn non_empty_lines(raw: &str) -> Vec<&str> {
    raw.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

pub fn remote_parse(role: Role, raw: &str) -> Result<BackendResponse, BackendError> {
    let err = || parse_error(role, raw);
    match role {
        Role::Plan => {
            let lines = non_empty_lines(raw);
            match lines.as_slice() {
                [line] => {
                    let line = line.trim_matches(|c| c == '"' || c == '`');
                    let next = if line == TERMINAL {
                        PlanNext::Terminal
                    } else {
                        PlanNext::Instruction(line.to_string())
                    };
                    Ok(BackendResponse::Plan(PlanResponse { next }))
                }
                _ => Err(err()),
            }
        }
        Role::Monitor => {
            let text = raw.trim_start();
            let word_end = text
                .find(|c: char| !c.is_ascii_alphabetic())
                .unwrap_or(text.len());
            let flag = ProgressFlag::parse(&text[..word_end]).ok_or_else(err)?;
            let rest = text[word_end..].trim();
            Ok(BackendResponse::Monitor(MonitorResponse {
                flag,
                rationale: rest.to_string(),
            }))
        }
        Role::Reflect => {
            let text = raw.trim();
            if text == "NONE" {
                return Ok(BackendResponse::Reflect(ReflectResponse { constraint: None }));
            }
            let body = text.strip_prefix("CONSTRAINT ").ok_or_else(err)?;
            let mut parts = body.splitn(3, " | ");
            let (tag, scope, sentence) = match (parts.next(), parts.next(), parts.next()) {
                (Some(t), Some(s), Some(x)) => (t.trim(), s.trim(), x.trim()),
                _ => return Err(err()),
            };
            if tag.is_empty() || tag.contains(char::is_whitespace) || scope.is_empty() || sentence.is_empty() {
                return Err(err());
            }
            Ok(BackendResponse::Reflect(ReflectResponse {
                constraint: Some(ConstraintDraft {
                    tag: tag.to_string(),
                    scope: scope.to_string(),
                    text: sentence.to_string(),
                }),
            }))
        }
        Role::Summarize => {
            let lines = non_empty_lines(raw);
            let (count_line, summary_lines) = lines.split_last().ok_or_else(err)?;
            let n = count_line
                .strip_prefix("failures:")
                .and_then(|n| n.trim().parse::<u32>().ok())
                .ok_or_else(err)?;
            if summary_lines.is_empty() {
                return Err(err());
            }
            Ok(BackendResponse::Summarize(SummarizeResponse {
                summary: summary_lines.join(" "),
                failure_count: n,
            }))
        }
    }
}

/// The reply text a well-behaved service would give for `resp`.
pub fn canonical_format(resp: &BackendResponse) -> String {
    match resp {
        BackendResponse::Plan(p) => String::from(p.next.clone()),
        BackendResponse::Monitor(m) if m.rationale.is_empty() => m.flag.as_str().to_string(),
        BackendResponse::Monitor(m) => format!("{} {}", m.flag, m.rationale),
        BackendResponse::Reflect(r) => match &r.constraint {
            None => "NONE".to_string(),
            Some(c) => format!("CONSTRAINT {} | {} | {}", c.tag, c.scope, c.text),
        },
        BackendResponse::Summarize(s) => format!("{}\nfailures: {}", s.summary, s.failure_count),
    }
}
