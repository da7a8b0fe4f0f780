use std::net::TcpStream;
use std::time::Duration;

use comaze::recorder::LiveObserver;
use comaze::service::Service;
use comaze::wire::{self, ClientMessage, ControlAction, Role, ServerMessage, TrialEventKind};
use comaze_core::partner::{proportional_action, Partner, PartnerKind, PartnerSpec};
use comaze_core::physics::{PhysicsConfig, TrayGeometry, TraySim};
use comaze_core::sac::{SacAgent, SacConfig};
use comaze_core::session::{run_trial, Seat, SessionConfig, TrialRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tokio_tungstenite::tungstenite::stream::MaybeTlsStream;
use tokio_tungstenite::tungstenite::{connect, Message, WebSocket};

struct Client {
    ws: WebSocket<MaybeTlsStream<TcpStream>>,
    seq: u64,
    last_seen: Option<u64>,
}

impl Client {
    fn connect(svc: &Service, query: &str) -> (Self, Role) {
        let url = format!("ws://{}/{}", svc.local_addr(), query);
        let (ws, _) = connect(url).unwrap();
        if let MaybeTlsStream::Plain(s) = ws.get_ref() {
            s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        }
        let mut c = Self {
            ws,
            seq: 0,
            last_seen: None,
        };
        match c.recv() {
            ServerMessage::Welcome { role } => (c, role),
            other => panic!("expected welcome, got {other:?}"),
        }
    }

    fn send(&mut self, msg: ClientMessage) {
        let text = wire::encode_client(&msg, self.seq);
        self.seq += 1;
        self.ws.send(Message::text(text)).unwrap();
    }

    fn send_raw(&mut self, text: &str) {
        self.ws.send(Message::text(text.to_string())).unwrap();
    }

    /// Next server message; asserts sequence numbers strictly increase.
    fn recv(&mut self) -> ServerMessage {
        loop {
            match self.ws.read().unwrap() {
                Message::Text(t) => {
                    let env = wire::decode_server(t.as_str()).unwrap();
                    if let Some(prev) = self.last_seen {
                        assert!(env.seq > prev, "sequence went from {prev} to {}", env.seq);
                    }
                    self.last_seen = Some(env.seq);
                    return env.msg;
                }
                _ => continue,
            }
        }
    }
}

fn sim() -> TraySim<f64> {
    TraySim::new(TrayGeometry::default(), PhysicsConfig::default()).unwrap()
}

fn agent() -> SacAgent<f64> {
    SacAgent::new(SacConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

fn paced() -> SessionConfig {
    SessionConfig {
        realtime: true,
        ..Default::default()
    }
}

fn live_trial(svc: &Service, partner: &mut Partner, trial: usize) -> TrialRecord {
    let sim = sim();
    let agent = agent();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut inner = ();
    let mut obs = LiveObserver {
        service: svc,
        inner: &mut inner,
    };
    run_trial(Seat::Test(&agent), partner, &sim, &paced(), trial, &mut rng, &mut obs).unwrap()
}

fn live_partner(svc: &Service) -> Partner {
    Partner::live(PartnerSpec::of_kind(PartnerKind::Live), TrayGeometry::default(), svc.mailbox()).unwrap()
}

#[test]
fn commands_drive_the_partner_axis_through_the_socket() {
    let svc = Service::start("127.0.0.1", 0, PhysicsConfig::default().max_tilt).unwrap();
    let mut partner = live_partner(&svc);
    std::thread::scope(|scope| {
        let session = scope.spawn(|| live_trial(&svc, &mut partner, 0));

        let (mut player, role) = Client::connect(&svc, "");
        assert_eq!(role, Role::Player);
        let (mut second, role) = Client::connect(&svc, "");
        assert_eq!(role, Role::Spectator, "the seat is taken");
        let (mut watcher, role) = Client::connect(&svc, "?role=spectator");
        assert_eq!(role, Role::Spectator);

        player.send_raw("{\"type\":\"command\",\"phi_human\":0.5}");
        player.send_raw("garbage");
        player.send(ClientMessage::Command { phi_human: 0.1 });
        second.send(ClientMessage::Command { phi_human: -0.1 });
        watcher.send(ClientMessage::Control {
            action: ControlAction::Abort,
        });
        player.send(ClientMessage::Control {
            action: ControlAction::Start,
        });

        let mut starts = 0;
        let mut phis = Vec::new();
        loop {
            match player.recv() {
                ServerMessage::TrialEvent {
                    kind: TrialEventKind::Start,
                    beeps,
                    ..
                } => {
                    assert_eq!(beeps, 3);
                    starts += 1;
                }
                ServerMessage::State { frame, phi, .. } => {
                    assert_eq!(frame, phis.len());
                    phis.push(phi);
                    if phis.len() == 4 {
                        player.send(ClientMessage::Control {
                            action: ControlAction::Abort,
                        });
                    }
                }
                ServerMessage::TrialEvent {
                    kind: TrialEventKind::End,
                    beeps,
                    score,
                    ..
                } => {
                    assert_eq!(beeps, 1);
                    assert_eq!(score, Some(0));
                    break;
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        assert_eq!(starts, 1);
        assert!(phis[0] > 0.0 && phis[1] > phis[0], "phi follows the command: {phis:?}");

        let record = session.join().unwrap();
        assert!(record.aborted && !record.success);
        assert_eq!(record.score, 0);
        assert_eq!(record.frames_used, phis.len());
        for f in &record.frames {
            assert_eq!(f.a_human, proportional_action(0.1, f.state[5]));
        }
        assert_eq!(record.frames[0].a_human, 0.2);

        // The spectator saw the same stream.
        assert!(matches!(watcher.recv(), ServerMessage::TrialEvent { beeps: 3, .. }));
    });
}

#[test]
fn player_disconnect_aborts_the_trial_and_pauses() {
    let svc = Service::start("127.0.0.1", 0, PhysicsConfig::default().max_tilt).unwrap();
    let mut partner = live_partner(&svc);
    std::thread::scope(|scope| {
        let session = scope.spawn(|| live_trial(&svc, &mut partner, 1));
        let (mut player, _) = Client::connect(&svc, "");
        player.send(ClientMessage::Command { phi_human: -0.05 });
        player.send(ClientMessage::Control {
            action: ControlAction::Start,
        });
        while !matches!(player.recv(), ServerMessage::State { frame: 2, .. }) {}
        drop(player);
        let record = session.join().unwrap();
        assert!(record.aborted);
        assert_eq!(record.score, 0);
        assert!(record.frames_used < 200);
    });
    assert!(svc.mailbox().is_closed());
    for _ in 0..100 {
        if !svc.has_player() {
            break;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    assert!(!svc.has_player());

    // A new player gets a fresh mailbox and must start again.
    let (_player, role) = Client::connect(&svc, "");
    assert_eq!(role, Role::Player);
    svc.wait_for_player(Duration::from_secs(5)).unwrap();
    assert!(!svc.mailbox().is_closed());
    assert!(svc.mailbox().latest().is_none());
}

#[test]
fn waiting_for_a_player_times_out() {
    let svc = Service::start("127.0.0.1", 0, 0.1).unwrap();
    let err = svc.wait_for_player(Duration::from_millis(200)).unwrap_err();
    assert!(format!("{err:#}").contains("no player connected"));
}
