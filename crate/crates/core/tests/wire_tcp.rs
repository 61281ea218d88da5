//! Full sessions over loopback sockets.

use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use magicrect_core::engine::NoiseModel;
use magicrect_core::protocol::{run_protocol, JointSampler, RoundMix};
use magicrect_core::strategies::DeviceModel;
use magicrect_core::wire::{
    connect_with_retry, device_kind_name, prover_loop, referee_serve, state_service, Endpoint, RefereeConfig, Role,
    ServiceResponder, WireError, WireMessage,
};

const T: Duration = Duration::from_secs(20);

fn accept_two(l: &TcpListener) -> (Endpoint, Endpoint) {
    let a = Endpoint::tcp(l.accept().unwrap().0).unwrap();
    let b = Endpoint::tcp(l.accept().unwrap().0).unwrap();
    (a, b)
}

#[test]
fn tcp_session_matches_in_process() {
    let n = 7;
    let seed = 31;
    let rounds = 400;
    let dev = DeviceModel::noisy_honest(n, NoiseModel::YRotation { theta: 0.3 }).unwrap();
    let kind = device_kind_name(dev.kind());

    let svc_listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let svc_addr = svc_listener.local_addr().unwrap();
    let sampler = JointSampler::new(dev.clone()).unwrap();
    let svc = thread::spawn(move || {
        let (a, b) = accept_two(&svc_listener);
        state_service(&sampler, seed, a, b)
    });

    let ref_listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let ref_addr = ref_listener.local_addr().unwrap();
    let provers: Vec<_> = [Role::B, Role::A]
        .into_iter()
        .map(|role| {
            let kind = kind.clone();
            thread::spawn(move || -> Result<_, WireError> {
                let link = connect_with_retry(svc_addr, 3)?;
                let mut responder = ServiceResponder::connect(link, role, n, Some(kind), T)?;
                let mut ep = connect_with_retry(ref_addr, 3)?;
                prover_loop(&mut responder, role, n, &mut ep)
            })
        })
        .collect();

    let (e1, e2) = accept_two(&ref_listener);
    let cfg = RefereeConfig { n, rounds, mix: RoundMix::uniform(n), seed, timeout: T };
    let out = referee_serve(&cfg, e1, e2).unwrap();
    for p in provers {
        assert_eq!(p.join().unwrap().unwrap().answered, rounds);
    }
    assert_eq!(svc.join().unwrap().unwrap().rounds, rounds);

    let local = run_protocol(&dev, rounds, &cfg.mix, seed).unwrap();
    assert!(out.voided.is_empty());
    assert_eq!(out.transcript.records, local.records);
}

#[test]
fn garbage_over_tcp_aborts_session() {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    let client = thread::spawn(move || {
        let mut a = connect_with_retry(addr, 3).unwrap();
        let mut b = connect_with_retry(addr, 3).unwrap();
        a.send(&WireMessage::hello(Role::A, 3)).unwrap();
        b.send(&WireMessage::hello(Role::B, 3)).unwrap();
        let _ = a.recv();
        a.send_raw(&[0xff, 0xff, 0xff, 0xff]).unwrap();
        // hold the sockets open until the referee has given up
        while let Ok(m) = b.recv_timeout(T, "end") {
            if m == WireMessage::EndSession {
                break;
            }
        }
    });
    let (e1, e2) = accept_two(&l);
    let cfg = RefereeConfig { n: 3, rounds: 10, mix: RoundMix::uniform(3), seed: 0, timeout: T };
    let res = referee_serve(&cfg, e1, e2);
    assert!(matches!(res, Err(WireError::Frame(_))), "{res:?}");
    client.join().unwrap();
}

#[test]
fn connect_gives_up_after_retries() {
    let addr = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    assert!(connect_with_retry(addr, 1).is_err());
}
