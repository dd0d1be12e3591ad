//! Simulate one tutoring dialogue with the tripartite workflow (dean picks
//! the next speaker; teacher and student produce the turns) over a
//! scripted backend, then print the transcript.
//!
//! Run: cargo run --example simulate_dialogue

use dialogue_lab::sim::{run_simulation, AgentSet, Limits, ScriptedBackend, SimulationScenario};

fn main() {
    let scenario = SimulationScenario {
        problem_id: "p1".to_string(),
        question: "A train travels 120 km in 2 hours. What is its speed?".to_string(),
        tutoring_approach: "Ask the student to recall the distance-speed-time relation \
                            before computing."
            .to_string(),
        student_profile: "Knows the formula but mixes up which quantity to divide.".to_string(),
    };

    // the script alternates dean decisions with the chosen agent's reply
    let script = vec![
        "TEACHER",
        "What do we know about distance, speed, and time?",
        "STUDENT",
        "Speed equals distance times time... or divided by?",
        "TEACHER",
        "Divided. So what is 120 divided by 2?",
        "STUDENT",
        "60. The speed is 60 km per hour.",
        "TERMINATE",
    ];
    let backend = ScriptedBackend::new(script.into_iter().map(String::from).collect());

    let sim = run_simulation(&scenario, &AgentSet::default_templates(), &backend, &Limits::default())
        .expect("scripted run");

    println!("dialogue {} ({} turns, truncated={})", sim.dialogue.id, sim.dialogue.utterances.len(), sim.truncated);
    for u in &sim.dialogue.utterances {
        println!("{:>8}: {}", u.speaker.to_string(), u.text);
    }
    println!("\ndean decisions: {:?}", sim.decisions.iter().map(|d| &d.action).collect::<Vec<_>>());
}
