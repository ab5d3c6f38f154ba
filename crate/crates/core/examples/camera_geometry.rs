//! Pixel <-> camera <-> robot conversions and the grasp angle codec.

use graspfuse::geometry::{
    camera_to_robot, decode_angle, deproject, encode_angle, project, robot_to_camera, shortest_arc_quaternion,
    width_px_to_m, CameraModel, HandEyeTransform, Vec3,
};

fn main() -> graspfuse::Result<()> {
    let cam = CameraModel::synthetic(64);
    println!("intrinsics fx={:.2} cx={:.1} cy={:.1}", cam.fx, cam.cx, cam.cy);

    let p = deproject(40.0, 20.0, 0.55, &cam)?;
    let (u, v) = project(&p, &cam)?;
    println!("pixel (40, 20) at 0.55 m -> {:.4?} -> ({u:.3}, {v:.3})", p.as_slice());

    // Camera 0.6 m above the base, looking straight down.
    let down = nalgebra::UnitQuaternion::from_euler_angles(std::f64::consts::PI, 0.0, 0.0);
    let q = down.quaternion();
    let ext = HandEyeTransform::from_wxyz([q.w, q.i, q.j, q.k], [0.4, 0.0, 0.6])?;
    let r = camera_to_robot(&p, &ext);
    println!("robot frame {:.4?}, back {:.4?}", r.as_slice(), robot_to_camera(&r, &ext).as_slice());

    println!("20 px at 0.55 m = {:.4} m", width_px_to_m(20.0, 0.55, &cam)?);

    for deg in [-90.0, -45.0, 0.0, 30.0, 89.0] {
        let phi = f64::to_radians(deg);
        let (c, s) = encode_angle(phi)?;
        println!("phi {deg:>5} deg -> ({c:+.3}, {s:+.3}) -> {:+.2} deg", decode_angle(c, s)?.to_degrees());
    }

    let tilt = shortest_arc_quaternion(&Vec3::new(0.3, 0.0, 1.0).normalize())?;
    println!("shortest arc to a tilted normal: {:.2} deg", tilt.angle().to_degrees());
    Ok(())
}
