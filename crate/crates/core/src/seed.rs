//! Shipped seed data: the two-layer ontology, the fact-sheet exemplar and
//! two small demonstration nets.

use chrono::{DateTime, Utc};

use crate::ontology::{parse_ontology, LoadOptions, Ontology};
use crate::petri::{find_critical, Aspect, CriticalOptions, ExplorationBounds, Marking, PetriNet};
use crate::scenario::{ParameterId, ScenarioSheet, Selection};
use crate::store::{Meta, NetModel, ScenarioDocument, Status};

pub const ONTOLOGY_XML: &str = include_str!("../seed/ontology.xml");
pub const EXEMPLAR_XML: &str = include_str!("../seed/table1-exemplar.xml");
pub const EXEMPLAR_ID: &str = "table1-exemplar";

/// Number of instances in the shipped ontology.
pub const SEED_INSTANCE_COUNT: usize = 45;

pub fn ontology() -> Ontology {
    parse_ontology(ONTOLOGY_XML, LoadOptions::default())
        .expect("seed ontology is valid")
        .ontology
}

pub fn exemplar_document() -> ScenarioDocument {
    ScenarioDocument::from_xml(EXEMPLAR_XML).expect("seed exemplar is valid")
}

pub fn exemplar_sheet() -> ScenarioSheet {
    exemplar_document().sheet
}

fn seed_time() -> DateTime<Utc> {
    "2025-01-01T00:00:00Z".parse().unwrap()
}

fn demo_meta() -> Meta {
    Meta {
        author: "railsafe seed".into(),
        created: seed_time(),
        modified: seed_time(),
        status: Status::Draft,
        ontology_version: "1.0".into(),
    }
}

/// Fills in the shortest critical tables for the document's own predicate.
fn with_tables(mut doc: ScenarioDocument) -> ScenarioDocument {
    let model = doc.net.as_ref().expect("demo has a net");
    let predicate = model.predicate.as_ref().expect("demo has a predicate");
    let report = find_critical(
        &model.net,
        &model.initial,
        predicate,
        ExplorationBounds::default(),
        CriticalOptions::default(),
    )
    .expect("demo net explores");
    doc.tables = report.tables;
    doc
}

/// Two trains on three segments; an unprotected direction inversion sends
/// the stationed train towards the approaching one.
pub fn demo_collision() -> ScenarioDocument {
    use Aspect::*;
    let mut net = PetriNet::new();
    net.place("seg1", "Segment 1 occupancy", External)
        .place("seg2", "Segment 2 occupancy", External)
        .place("seg3", "Segment 3 occupancy", External)
        .place("train-a-seg1", "Train A on segment 1", External)
        .place("train-a-seg2", "Train A on segment 2", External)
        .place("train-a-seg3", "Train A on segment 3", External)
        .place("train-b-seg3", "Train B on segment 3", External)
        .place("train-b-seg2", "Train B on segment 2", External)
        .place("train-b-seg1", "Train B on segment 1", External)
        .place("route-protected", "Route of train A protected", Internal)
        .place("b-stationed", "Train B stationed", Internal)
        .place("b-direction-inverted", "Autopilot of B has inverted direction", Internal)
        .place("direction-order", "Direction order transmitted to B", Interface);
    net.transition("a-advance-1-2", "Train A enters segment 2", External)
        .transition("a-advance-2-3", "Train A enters segment 3", External)
        .transition("pa-invert-direction", "Autopilot inverts the direction of B", Internal)
        .transition("send-direction-order", "Direction order sent without redundancy", Interface)
        .transition("b-depart-3-2", "Train B departs towards segment 2", External)
        .transition("b-advance-2-1", "Train B enters segment 1", External);
    net.transitions[2].guard_note = "route check not performed".into();
    net.arc("train-a-seg1", "a-advance-1-2", 1)
        .arc("seg1", "a-advance-1-2", 1)
        .arc("a-advance-1-2", "train-a-seg2", 1)
        .arc("a-advance-1-2", "seg2", 1)
        .arc("train-a-seg2", "a-advance-2-3", 1)
        .arc("seg2", "a-advance-2-3", 1)
        .arc("a-advance-2-3", "train-a-seg3", 1)
        .arc("a-advance-2-3", "seg3", 1)
        .arc("b-stationed", "pa-invert-direction", 1)
        .arc("route-protected", "pa-invert-direction", 1)
        .arc("pa-invert-direction", "route-protected", 1)
        .arc("pa-invert-direction", "b-direction-inverted", 1)
        .arc("b-direction-inverted", "send-direction-order", 1)
        .arc("send-direction-order", "direction-order", 1)
        .arc("direction-order", "b-depart-3-2", 1)
        .arc("train-b-seg3", "b-depart-3-2", 1)
        .arc("seg3", "b-depart-3-2", 1)
        .arc("b-depart-3-2", "train-b-seg2", 1)
        .arc("b-depart-3-2", "seg2", 1)
        .arc("train-b-seg2", "b-advance-2-1", 1)
        .arc("seg2", "b-advance-2-1", 1)
        .arc("b-advance-2-1", "train-b-seg1", 1)
        .arc("b-advance-2-1", "seg1", 1);
    let initial: Marking = [
        ("train-a-seg1", 1),
        ("seg1", 1),
        ("train-b-seg3", 1),
        ("seg3", 1),
        ("b-stationed", 1),
        ("route-protected", 1),
    ]
    .into_iter()
    .collect();

    let mut sheet = exemplar_sheet();
    sheet.scenario_id = "demo-collision".into();
    sheet.title = "Demo: two trains, one segment".into();
    with_tables(ScenarioDocument {
        sheet,
        net: Some(NetModel {
            net,
            initial,
            predicate: Some("seg1 >= 2 or seg2 >= 2 or seg3 >= 2".parse().unwrap()),
        }),
        tables: Vec::new(),
        meta: demo_meta(),
    })
}

/// A passenger still boarding when the doors close.
pub fn demo_door_closing() -> ScenarioDocument {
    use Aspect::*;
    let mut net = PetriNet::new();
    net.place("train-at-platform", "Train stopped at the platform", External)
        .place("passenger-waiting", "Passenger waiting on the platform", External)
        .place("passenger-boarding", "Passenger in the doorway", External)
        .place("passenger-inside", "Passenger inside the vehicle", External)
        .place("passenger-caught", "Passenger caught by the doors", External)
        .place("train-departed", "Train departed", External)
        .place("doors-open", "Doors open", Internal)
        .place("doors-closed", "Doors closed and locked", Internal)
        .place("departure-authorised", "Departure authorisation sent", Interface);
    net.transition("passenger-enters", "Passenger steps into the doorway", External)
        .transition("passenger-boards", "Passenger completes boarding", External)
        .transition("close-doors", "Doors close", Internal)
        .transition("close-doors-on-passenger", "Doors close on the passenger", External)
        .transition("authorise-departure", "Departure authorised", Interface)
        .transition("depart", "Train departs", External);
    net.transitions[2].guard_note = "door closing time elapsed".into();
    net.arc("passenger-waiting", "passenger-enters", 1)
        .arc("doors-open", "passenger-enters", 1)
        .arc("passenger-enters", "doors-open", 1)
        .arc("passenger-enters", "passenger-boarding", 1)
        .arc("passenger-boarding", "passenger-boards", 1)
        .arc("doors-open", "passenger-boards", 1)
        .arc("passenger-boards", "doors-open", 1)
        .arc("passenger-boards", "passenger-inside", 1)
        .arc("doors-open", "close-doors", 1)
        .arc("close-doors", "doors-closed", 1)
        .arc("passenger-boarding", "close-doors-on-passenger", 1)
        .arc("doors-closed", "close-doors-on-passenger", 1)
        .arc("close-doors-on-passenger", "doors-closed", 1)
        .arc("close-doors-on-passenger", "passenger-caught", 1)
        .arc("train-at-platform", "authorise-departure", 1)
        .arc("doors-closed", "authorise-departure", 1)
        .arc("authorise-departure", "doors-closed", 1)
        .arc("authorise-departure", "departure-authorised", 1)
        .arc("departure-authorised", "depart", 1)
        .arc("depart", "train-departed", 1);
    let initial: Marking = [("train-at-platform", 1), ("doors-open", 1), ("passenger-waiting", 1)]
        .into_iter()
        .collect();

    let mut sheet = ScenarioSheet::new("demo-door-closing", "Demo: doors close on a boarding passenger");
    sheet.transport_system = "VAL".into();
    sheet.narrative = "The door closing time elapses while a passenger is still in the doorway. \
                       Nothing detects the obstacle and departure is authorised."
        .into();
    sheet
        .select(ParameterId::GeographicalPrinciple, Selection::value("fixed-canton").key())
        .select(ParameterId::Risks, Selection::value("passenger-dragging").key())
        .select(ParameterId::RiskLinkedFunctions, Selection::value("door-closing-time").key())
        .select(ParameterId::GeographicalAreas, Selection::value("terminus").key())
        .select(ParameterId::Actors, Selection::value("number-of-trains").with_count(1).key())
        .select(ParameterId::Actors, Selection::value("mobile-operator"))
        .select(ParameterId::IncidentalFunctions, Selection::value("instructions").key())
        .select(
            ParameterId::SummarizedFailures,
            Selection::coded("OP07", "Doors closed on a boarding passenger"),
        )
        .select(
            ParameterId::InterimSolutions,
            Selection::coded("OS03", "Detect obstacles before locking the doors"),
        );
    with_tables(ScenarioDocument {
        sheet,
        net: Some(NetModel {
            net,
            initial,
            predicate: Some("passenger-caught >= 1".parse().unwrap()),
        }),
        tables: Vec::new(),
        meta: demo_meta(),
    })
}
