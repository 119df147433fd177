//! Prompt texts. The system prompts and the revision instructions are fixed
//! message contracts and must not be reworded.

use topoagent_core::problem::RevisionRules;

pub const JUDGE_SYSTEM_PROMPT: &str = "\
Identity: You are an expert judge in topology optimization specializing in evaluating structural morphology.

Context: Your task is to evaluate the aesthetic quality only of the structure shown in each image, strictly based on perceived global structural complexity and richness at the global scale.

Priority: Global structural organization takes absolute priority over local detail. If a structure exhibits a highly branched, intricate, and hierarchically rich global form, it should score highly even if some members are thick, coarse, or locally simple. Do NOT reward local intricacy unless it meaningfully contributes to increased overall perceived global structural complexity.

Task: For each image, assign a score from 1 to 5 (half points allowed) based on global structural complexity:
(1) extremely simple global structure; very few branches, strong minimalism, little hierarchy.
(2) low global complexity; limited branching with clear dominant members.
(3) moderate global complexity; noticeable branching with some hierarchy.
(4) high global complexity; many major branches and a rich, multi-level hierarchy.
(5) extremely complex and intricate at the global level; dense branching network, multiple competing load paths, and exceptional structural richness.";

const VISION_IDENTITY: &str = "Identity: You are analyzing the result of a 3D topology optimization problem.";

const VISION_CONTEXT: &str = "Context: Take the judge's feedback into account. If the judge indicated the structure is not complex enough, suggest more aggressive changes. If the judge noted improvement, continue in that direction but push further.";

const VISION_TASK: &str = "\
Task: Analyze the optimized structure shown in the image(s) and recommend specific, actionable changes to the optimization parameters that will produce a significantly more skeletal, highly branched structure with many thin members and multiple internal load paths.

Your goal is to increase structural skeletonization and skinny branching complexity. This means promoting the formation of thin structural members instead of thick plates, encouraging splitting into multiple load paths rather than a single dominant path, increasing internal structural hierarchy and connectivity, and reducing continuous sheet-like regions while promoting truss-like behavior.";

pub const HISTORY_INSTRUCTIONS: &str = "\
Read Complete History: Below is the complete history of all previous optimization iterations. Each entry shows the TO parameters used, the AI Judge's score (1–5) with feedback, and the resulting structure image. Study the visual progression to understand which parameter changes improved or worsened the structure.

Learn from History:
1. Visually compare the structures.
2. Identify which parameter changes correlated with higher scores.
3. Identify which changes led to worse results.
4. Build on what worked and avoid repeating what didn't.
5. Be specific about which parameters to change and by how much.";

/// Designer request used when none is configured.
pub const DEFAULT_PREFERENCE: &str = "Make the structure more skeletal and tree-like: many thin branching members, \
several load paths instead of one, and a clear hierarchy of main and secondary branches that stay connected.";

pub const DIFF_FORMAT_INSTRUCTIONS: &str = "\
Answer with your reasoning, then exactly one fenced ```json block. The block is an object mapping each parameter \
path you change to a two-element array [current value, new value], plus a \"rationale\" string. Paths use dots \
between keys and [i] for list entries, for example \"simp.penalty\", \"mesh.nelx\" or \"optimizer.fun_tol\". \
Only include parameters you want to change.";

pub const JUDGE_FORMAT_INSTRUCTIONS: &str = "\
Each design above is labelled with a letter and shown from six directions (front, back, top, bottom, left, right). \
Score every design. For each one write a line of the form `Image <letter> (<label>): Score -- <score>`, then a line \
`Justification: <text>` and a line `Confidence: <percent>%`.";

/// Score text used in the system prompt before any design has been judged.
pub const UNSCORED: &str = "n/a";

fn format_score(score: Option<f64>) -> String {
    match score {
        Some(s) => format!("{s:.1}"),
        None => UNSCORED.to_string(),
    }
}

/// The vision system prompt. `best` is `(revision, score)` of the
/// best-scoring design; `None` drops the history-dependent layer.
pub fn vision_system_prompt(best: Option<(usize, Option<f64>)>) -> String {
    let mut layers = vec![VISION_IDENTITY.to_string(), VISION_CONTEXT.to_string()];
    if let Some((revision, score)) = best {
        layers.push(format!(
            "Priority: Revision {revision} scored highest at {}. IMPORTANT: Base your suggested changes on this best-scoring configuration, NOT the most recent one (unless they are the same). Build on what worked best.",
            format_score(score)
        ));
    }
    layers.push(VISION_TASK.to_string());
    layers.join("\n\n")
}

/// The numbered rule list for `rules`.
pub fn rules_block(rules: &RevisionRules) -> String {
    let mut out = String::from("Follow these rules:");
    for (k, rule) in rules.instructions().iter().enumerate() {
        out.push_str(&format!("\n{}. {rule}", k + 1));
    }
    out
}
