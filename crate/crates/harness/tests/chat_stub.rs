use std::time::{Duration, Instant};

use haunted_core::engine::Scenario;
use haunted_core::messages::{InstructionVariant, MessageCatalog};
use haunted_core::transcript::{ChatMessage, InvalidReason, OutcomeStatus, Role};
use haunted_harness::{
    run_batch, run_trial, Agent, AgentConfig, AgentError, BatchOptions, ChatAgent, StubScript,
    StubServer, TrialPolicy,
};

fn config(url: String) -> AgentConfig {
    let mut c = AgentConfig::new(url, "stub-model");
    c.request_pacing = Duration::ZERO;
    c.backoff = Duration::from_millis(10);
    c.max_retries = 2;
    c.timeout = Duration::from_secs(10);
    c
}

#[test]
fn reply_text_is_extracted() {
    let stub = StubServer::start(StubScript::replies(["left"])).unwrap();
    let mut agent = ChatAgent::with_secret(config(stub.url()), "sekrit");
    assert_eq!(agent.reply(&[ChatMessage::user("go")]).unwrap(), "left");
    let requests = stub.requests();
    assert_eq!(requests.len(), 1);
    assert_eq!(requests[0].authorization.as_deref(), Some("Bearer sekrit"));
    assert_eq!(requests[0].body["model"], "stub-model");
    assert_eq!(requests[0].body["messages"][0]["content"], "go");
}

#[test]
fn rate_limit_then_success_retries_once() {
    let stub = StubServer::start(StubScript::replies(["up"]).with_failures(vec![429])).unwrap();
    let mut agent = ChatAgent::with_secret(config(stub.url()), "k");
    let start = Instant::now();
    assert_eq!(agent.reply(&[ChatMessage::user("go")]).unwrap(), "up");
    assert_eq!(stub.requests().len(), 2);
    assert!(start.elapsed() >= Duration::from_millis(10));
}

#[test]
fn persistent_server_error_is_a_transport_error() {
    let stub = StubServer::start(StubScript::always_failing(500)).unwrap();
    let mut agent = ChatAgent::with_secret(config(stub.url()), "k");
    let err = agent.reply(&[ChatMessage::user("go")]).unwrap_err();
    assert!(matches!(err, AgentError::Transport(_)));
    // one try plus max_retries
    assert_eq!(stub.requests().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let stub = StubServer::start(StubScript::always_failing(401)).unwrap();
    let mut agent = ChatAgent::with_secret(config(stub.url()), "k");
    assert!(agent.reply(&[]).is_err());
    assert_eq!(stub.requests().len(), 1);
}

#[test]
fn transport_failure_marks_the_trial_invalid() {
    let stub = StubServer::start(StubScript::always_failing(503)).unwrap();
    let mut agent = ChatAgent::with_secret(config(stub.url()), "k");
    let t = run_trial(
        &mut agent,
        &Scenario::canonical(),
        &TrialPolicy::default(),
        "t",
    )
    .unwrap();
    assert_eq!(t.outcome.status, OutcomeStatus::Invalid);
    assert_eq!(t.outcome.invalid_reason, Some(InvalidReason::Transport));
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let url = {
        let stub = StubServer::start(StubScript::default()).unwrap();
        stub.url()
    };
    let mut agent = ChatAgent::with_secret(config(url), "k");
    assert!(matches!(agent.reply(&[]), Err(AgentError::Transport(_))));
}

#[test]
fn optimal_stub_batch_passes_every_trial() {
    for variant in InstructionVariant::ALL {
        let stub = StubServer::start(StubScript::optimal(variant)).unwrap();
        let agent = ChatAgent::with_secret(config(stub.url()), "k");
        let policy = TrialPolicy::for_variant(variant);
        let result = run_batch(
            |_| Box::new(agent.clone()),
            20,
            &Scenario::canonical(),
            &policy,
            &BatchOptions {
                parallelism: 4,
                ..BatchOptions::default()
            },
        )
        .unwrap();
        assert_eq!(result.summary.passes, 20, "{variant}");
        let expected = format!(
            "You are the player, solve the task...\n\n{}",
            MessageCatalog::english().instructions(variant)
        );
        for t in &result.transcripts {
            let dialogue = t.raw_dialogue.as_ref().unwrap();
            assert_eq!(dialogue[0].role, Role::User);
            assert_eq!(dialogue[0].content, expected);
            assert_eq!(t.agent.model_id.as_deref(), Some("stub-model"));
        }
        assert_eq!(stub.requests().len(), 20 * 12);
    }
}
