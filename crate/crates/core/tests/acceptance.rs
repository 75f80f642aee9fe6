//! Acceptance criteria, one pass/fail line each. Runs as a plain binary so
//! the lines are always printed; exits nonzero if any criterion fails.

use std::process::ExitCode;

use dynapitch_core::bridge::{Bridge, BridgeConfig};
use dynapitch_core::field::Field;
use dynapitch_core::kicker::{KickerParams, KickerState};
use dynapitch_core::kinematics::{forward, inverse, BodyTwist, WheelConfig};
use dynapitch_core::net::{RobotCommand, VisionFrame, VisionRobot, FLAG_CHARGE, FLAG_DRIBBLE};
use dynapitch_core::protocol::{
    crc16, decode_frame, Instruction, InstructionPacket, Packet, ParseEvent, StatusPacket, StreamParser,
};
use dynapitch_core::servo::table::ADDR_GOAL_VELOCITY;
use dynapitch_core::servo::VirtualBus;
use dynapitch_core::tactics::{run_scenario, Scenario, ScenarioConfig};
use dynapitch_core::{Pose, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FUZZ_CASES: usize = 10_000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Bytes skewed towards the header and escape values.
fn wire_byte(rng: &mut ChaCha8Rng) -> u8 {
    match rng.random_range(0..4) {
        0 => 0xFF,
        1 => 0xFD,
        _ => rng.random(),
    }
}

fn random_packet(rng: &mut ChaCha8Rng) -> Packet {
    let id = loop {
        let id: u8 = rng.random();
        if id != 253 && id != 255 {
            break id;
        }
    };
    let len = rng.random_range(0..48);
    let params: Vec<u8> = (0..len).map(|_| wire_byte(rng)).collect();
    if rng.random_bool(0.5) {
        let instruction = [
            Instruction::Ping,
            Instruction::Read,
            Instruction::Write,
            Instruction::SyncRead,
            Instruction::SyncWrite,
        ][rng.random_range(0..5)];
        InstructionPacket::new(id, instruction, params).into()
    } else {
        let mut s = StatusPacket::ok(id.min(252), params);
        s.error = rng.random();
        s.into()
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..FUZZ_CASES {
        let p = random_packet(&mut rng);
        let bytes = p.encode().map_err(|e| format!("case {i}: encode {e}"))?;
        let back = decode_frame(&bytes).map_err(|e| format!("case {i}: decode {e}"))?;
        check(back == p, || format!("case {i}: decoded packet differs"))?;
        check(back.encode().unwrap() == bytes, || format!("case {i}: re-encode differs"))?;
    }

    let packets: Vec<Packet> = (0..50).map(|_| random_packet(&mut rng)).collect();
    let stream: Vec<u8> = packets.iter().flat_map(|p| p.encode().unwrap()).collect();
    let expected: Vec<ParseEvent> = packets.iter().cloned().map(ParseEvent::Packet).collect();
    for k in 0..100 {
        let mut parser = StreamParser::new();
        let mut events = Vec::new();
        let mut pos = 0;
        while pos < stream.len() {
            let n = rng.random_range(1..=64).min(stream.len() - pos);
            events.extend(parser.push(&stream[pos..pos + n]));
            pos += n;
        }
        events.extend(parser.finish());
        check(events == expected, || format!("partition {k}: events differ"))?;
    }
    Ok(format!("{FUZZ_CASES} packets bit-exact; 100 partitions of a 50-packet stream agree"))
}

fn crc16_bitwise(data: &[u8]) -> u16 {
    let mut crc: u16 = 0;
    for &b in data {
        crc ^= (b as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ 0x8005 } else { crc << 1 };
        }
    }
    crc
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..FUZZ_CASES {
        let len = rng.random_range(0..256);
        let buf: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        check(crc16(&buf) == crc16_bitwise(&buf), || format!("buffer {i} disagrees"))?;
    }
    for b in 0..=255u8 {
        check(crc16(&[b]) == crc16_bitwise(&[b]), || format!("byte {b:#04x} disagrees"))?;
    }
    let frame = InstructionPacket::ping(1).encode().unwrap();
    let oracle = crc16_bitwise(&[0xFF, 0xFF, 0xFD, 0x00, 0x01, 0x03, 0x00, 0x01]);
    let wire = u16::from_le_bytes([frame[8], frame[9]]);
    check(oracle == 0x4E19 && wire == oracle, || {
        format!("PING crc wire {wire:#06x} oracle {oracle:#06x}")
    })?;
    Ok(format!("{FUZZ_CASES} buffers + 256 single bytes agree; PING crc {wire:#06x}"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = WheelConfig::default();
    let doubled = WheelConfig {
        gear_ratio: 2.0 * cfg.gear_ratio,
        ..cfg
    };
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let t = BodyTwist::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-10.0..10.0),
        );
        let back = forward(&inverse(t, &cfg), &cfg).map_err(|e| e.to_string())?;
        let scale = t.vx.abs().max(t.vy.abs()).max(t.omega.abs()).max(1e-300);
        let err = [back.vx - t.vx, back.vy - t.vy, back.omega - t.omega]
            .iter()
            .fold(0.0f64, |m, d| m.max(d.abs()))
            / scale;
        worst = worst.max(err);
        check(err <= 1e-9, || format!("twist {i}: relative error {err:e}"))?;
        let a = inverse(t, &cfg).0;
        let b = inverse(t, &doubled).0;
        for w in 0..4 {
            let rel = (b[w] - a[w] / 2.0).abs() / a[w].abs().max(1e-300);
            check(rel <= 1e-12 || a[w] == 0.0, || format!("twist {i} wheel {w}: 2G ratio off by {rel:e}"))?;
        }
    }
    Ok(format!("1000 twists, worst relative error {worst:.1e}; 2G halves rates"))
}

fn criterion_4() -> Outcome {
    let mut bus = VirtualBus::with_drive_servos([1]).map_err(|e| e.to_string())?;
    let write = InstructionPacket::write(1, ADDR_GOAL_VELOCITY, &200i32.to_le_bytes())
        .encode()
        .unwrap();
    bus.transact(&write);
    let dt = 0.001;
    let mut reached = None;
    for k in 1..=150 {
        bus.step(dt);
        let v = bus.servo(1).unwrap().present_velocity();
        if reached.is_none() && (v - 200).abs() <= 1 {
            reached = Some(k as f64 * dt);
        }
        if reached.is_some() {
            check((v - 200).abs() <= 1, || format!("left the band at {:.3} s: {v}", k as f64 * dt))?;
        }
    }
    let t = reached.ok_or("200 ± 1 not reached within 0.15 s")?;
    Ok(format!("200 ± 1 units at {t:.3} s (limit 0.150 s)"))
}

fn criterion_5() -> Outcome {
    let p = KickerParams::default();
    let mut s = KickerState::charged(&p);
    let speed = s.trigger(&p, 0.0);
    let closed = (2.0 * 0.02 * 0.5 * 2200e-6 * 190f64.powi(2) / 0.046).sqrt();
    check((speed - closed).abs() <= 1e-12, || format!("speed {speed} vs {closed}"))?;

    let dt = 0.001;
    let mut s = KickerState {
        charging: true,
        ..KickerState::default()
    };
    let mut k = 0u64;
    while s.v_cap < p.v_max && k < 10_000 {
        k += 1;
        s.charge_step(&p, k as f64 * dt, dt);
    }
    let t = k as f64 * dt;
    let expected = 2200e-6 * 190.0 / 0.5;
    check((t - expected).abs() <= dt, || format!("charged at {t} s, expected {expected} s"))?;
    Ok(format!("speed {speed:.6} m/s (error {:.1e}); full at {t:.3} s vs {expected:.3} s", (speed - closed).abs()))
}

fn criterion_6() -> Outcome {
    let cfg = ScenarioConfig::default();
    let mut hashes = Vec::new();
    let mut goal = None;
    for _ in 0..3 {
        let r = run_scenario(Scenario::OneVZeroGoal, 7, &cfg, None).map_err(|e| e.to_string())?;
        check(r.success, || "no goal".into())?;
        goal = r.goal_time;
        hashes.push(r.trace_hash);
    }
    let t = goal.ok_or("no goal time")?;
    check(t < 15.0, || format!("goal at {t} s"))?;
    check(hashes.iter().all(|h| *h == hashes[0]), || format!("hashes differ: {hashes:x?}"))?;
    Ok(format!("goal at {t:.3} s; hash {:016x} on 3 runs", hashes[0]))
}

fn criterion_7() -> Outcome {
    let r = run_scenario(Scenario::Sprint, 0, &ScenarioConfig::default(), None).map_err(|e| e.to_string())?;
    let t = r.sprint_time_4m.ok_or("line not crossed")?;
    check((1.708..=2.05).contains(&t), || format!("sprint {t} s outside [1.708, 2.05]"))?;
    Ok(format!("sprint_time_4m {t:.3} s in [1.708, 2.05]"))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = BridgeConfig::default();
    // A kicker strong enough that the cap, not the capacitor, limits the kick.
    let strong = KickerParams {
        efficiency: 1.0,
        ..KickerParams::default()
    };
    let mut ticks = 0;
    let mut kicks = 0;
    let mut max_kick: f64 = 0.0;
    for stream in 0..100 {
        let mut field = Field::new(Default::default(), WheelConfig::default(), strong).map_err(|e| e.to_string())?;
        field.add_robot(0, Pose::new(0.0, 0.0, 0.0)).map_err(|e| e.to_string())?;
        field.robot_mut(0).unwrap().kicker = KickerState::charged(&strong);
        let gate = field.params.robot_radius + field.params.ball_radius + 0.002;
        let mut bridge = Bridge::new(0, cfg);
        let silent_from = rng.random_range(0..150usize);
        let mut last_rx = f64::NEG_INFINITY;
        for k in 0..150 {
            let now = field.t();
            if k < silent_from && rng.random_bool(0.8) {
                bridge.receive(RobotCommand {
                    robot_id: 0,
                    vx_mm_s: rng.random(),
                    vy_mm_s: rng.random(),
                    omega_mrad_s: rng.random(),
                    kick_mm_s: rng.random(),
                    flags: rng.random::<u8>() & (FLAG_CHARGE | FLAG_DRIBBLE),
                });
                last_rx = now;
            }
            // Keep the ball in the kicker mouth so kick requests reach the kicker.
            let robot = field.robot(0).unwrap().pose;
            field.place_ball(robot.position() + robot.heading() * gate, Vec2::ZERO);
            let rep = bridge.process_tick(&mut field).map_err(|e| e.to_string())?;
            ticks += 1;
            let t = rep.twist;
            check(t.linear_speed() <= cfg.v_max + 1e-12, || format!("stream {stream}: speed {}", t.linear_speed()))?;
            check(t.omega.abs() <= cfg.omega_max + 1e-12, || format!("stream {stream}: omega {}", t.omega))?;
            if now - last_rx > cfg.staleness_timeout {
                check(t == BodyTwist::ZERO, || format!("stream {stream}: nonzero twist after silence"))?;
            }
            if let Some(kick) = rep.kick {
                if kick.speed > 0.0 {
                    kicks += 1;
                }
                max_kick = max_kick.max(kick.speed);
                let ball = field.state.ball.vel.norm();
                check(kick.speed <= cfg.kick_cap && ball <= cfg.kick_cap + 1e-12, || {
                    format!("stream {stream}: kick {} ball {ball}", kick.speed)
                })?;
            }
            for _ in 0..10 {
                field.step().map_err(|e| e.to_string())?;
            }
        }
    }
    check(kicks > 0 && (max_kick - cfg.kick_cap).abs() < 1e-9, || {
        format!("cap never exercised: {kicks} kicks, max {max_kick}")
    })?;
    Ok(format!("{ticks} fuzzed ticks within limits; zero after silence; {kicks} kicks, max {max_kick:.3} m/s"))
}

fn criterion_9() -> Outcome {
    let cmd = RobotCommand {
        robot_id: 2,
        vx_mm_s: 1000,
        vy_mm_s: -250,
        omega_mrad_s: 3141,
        kick_mm_s: 4000,
        flags: FLAG_CHARGE,
    }
    .encode();
    let vision = VisionFrame {
        frame_no: 42,
        t_us: 700_000,
        ball_x_mm: 120,
        ball_y_mm: -80,
        robots: vec![
            VisionRobot { id: 0, x_mm: 1000, y_mm: -500, theta_mrad: 1571 },
            VisionRobot { id: 1, x_mm: -3000, y_mm: 2000, theta_mrad: -200 },
        ],
    }
    .encode()
    .map_err(|e| e.to_string())?;
    let mut corruptions = 0;
    for i in 0..cmd.len() {
        for d in 1..=255u8 {
            let mut b = cmd;
            b[i] ^= d;
            check(RobotCommand::decode(&b).is_err(), || format!("command byte {i} ^ {d:#04x} accepted"))?;
            corruptions += 1;
        }
    }
    for i in 0..vision.len() {
        for d in 1..=255u8 {
            let mut b = vision.clone();
            b[i] ^= d;
            check(VisionFrame::decode(&b).is_err(), || format!("vision byte {i} ^ {d:#04x} accepted"))?;
            corruptions += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..FUZZ_CASES {
        let base: &[u8] = if i % 2 == 0 { &cmd } else { &vision };
        let mut buf = base.to_vec();
        if rng.random_bool(0.5) {
            buf.truncate(rng.random_range(0..base.len()));
        } else {
            let extra = rng.random_range(1..64);
            buf.extend((0..extra).map(|_| rng.random::<u8>()));
        }
        // Decoders must reject without reading outside `buf`; a panic here
        // (slice index out of range) would abort the run.
        check(RobotCommand::decode(&buf).is_err() && VisionFrame::decode(&buf).is_err(), || {
            format!("case {i}: resized buffer of {} bytes accepted", buf.len())
        })?;
    }
    Ok(format!("{corruptions} single-byte corruptions rejected; {FUZZ_CASES} truncated/overlong buffers rejected"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("protocol roundtrip fuzz", criterion_1),
        ("crc oracle equivalence", criterion_2),
        ("kinematics identity", criterion_3),
        ("servo tracking", criterion_4),
        ("kicker closed form", criterion_5),
        ("end-to-end goal", criterion_6),
        ("sprint metric", criterion_7),
        ("safety properties", criterion_8),
        ("wire robustness", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} [PASS] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} [FAIL] {name}: {why}", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
