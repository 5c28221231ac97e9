#include "anthrofit/toy_assets.h"

#include "anthrofit/rng.h"

#include <array>
#include <cmath>
#include <numbers>

namespace anthrofit::toy {

namespace {

using Weights = std::vector<std::pair<int, double>>;

struct MeshBuilder {
  std::vector<Vector3d> verts;
  std::vector<Weights> weights;
  std::vector<std::array<int, 3>> faces;

  int point(const Vector3d& p, Weights w) {
    verts.push_back(p);
    weights.push_back(std::move(w));
    return static_cast<int>(verts.size()) - 1;
  }

  // Vertex k sits at angle 2*pi*k/n, measured from `ea` towards `eb`.
  int ring(const Vector3d& center, const Vector3d& ea, const Vector3d& eb, double ra, double rb, int n, Weights w) {
    const int first = static_cast<int>(verts.size());
    for (int k = 0; k < n; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / n;
      point(center + ra * std::cos(phi) * ea + rb * std::sin(phi) * eb, w);
    }
    return first;
  }

  void bridge(int a, int b, int n) {
    for (int k = 0; k < n; ++k) {
      const int k1 = (k + 1) % n;
      faces.push_back({a + k, a + k1, b + k1});
      faces.push_back({a + k, b + k1, b + k});
    }
  }

  void fan(int ringStart, int apex, int n) {
    for (int k = 0; k < n; ++k) {
      faces.push_back({ringStart + k, ringStart + (k + 1) % n, apex});
    }
  }
};

BodyModel finish(const MeshBuilder& b, int numJoints) {
  BodyModel m;
  const int V = static_cast<int>(b.verts.size());
  m.v_template.resize(V, 3);
  m.skin_weights = Eigen::MatrixXd::Zero(V, numJoints);
  for (int v = 0; v < V; ++v) {
    m.v_template.row(v) = b.verts[v].transpose();
    for (const auto& [j, w] : b.weights[v]) {
      m.skin_weights(v, j) += w;
    }
  }
  m.faces.resize(static_cast<Eigen::Index>(b.faces.size()), 3);
  for (size_t f = 0; f < b.faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      m.faces(static_cast<Eigen::Index>(f), k) = b.faces[f][k];
    }
  }
  return m;
}

Eigen::RowVectorXd centroidRow(int V, int first, int n) {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(V);
  for (int k = 0; k < n; ++k) {
    row(first + k) = 1.0 / n;
  }
  return row;
}

// ---------------------------------------------------------------------------
// Toy human

enum Dim : int {
  kFootH,
  kCalfLen,
  kThighLen,
  kTorsoLen,
  kNeckLen,
  kHeadLen,
  kShoulderDrop,
  kHipHalfWidth,
  kShoulderHalfWidth,
  kTorsoRxHip,
  kTorsoRzHip,
  kTorsoRxWaist,
  kTorsoRzWaist,
  kTorsoRxChest,
  kTorsoRzChest,
  kTorsoRxShoulder,
  kTorsoRzShoulder,
  kNeckR,
  kHeadRx,
  kHeadRz,
  kUpperArmLen,
  kUpperArmR,
  kForearmLen,
  kElbowR,
  kForearmR,
  kWristR,
  kHandLen,
  kHandHalfWidth,
  kHandHalfThick,
  kThighR,
  kThighMidR,
  kKneeR,
  kCalfR,
  kAnkleR,
  kFootLen,
  kHeelBack,
  kFootHalfWidth,
  kFootHalfHeight,
  kNumDims,
};

using Dims = std::array<double, kNumDims>;

Dims maleDims() {
  Dims d{};
  d[kFootH] = 0.08;
  d[kCalfLen] = 0.40;
  d[kThighLen] = 0.38;
  d[kTorsoLen] = 0.55;
  d[kNeckLen] = 0.10;
  d[kHeadLen] = 0.24;
  d[kShoulderDrop] = 0.05;
  d[kHipHalfWidth] = 0.09;
  d[kShoulderHalfWidth] = 0.19;
  d[kTorsoRxHip] = 0.165;
  d[kTorsoRzHip] = 0.11;
  d[kTorsoRxWaist] = 0.145;
  d[kTorsoRzWaist] = 0.10;
  d[kTorsoRxChest] = 0.165;
  d[kTorsoRzChest] = 0.115;
  d[kTorsoRxShoulder] = 0.13;
  d[kTorsoRzShoulder] = 0.09;
  d[kNeckR] = 0.055;
  d[kHeadRx] = 0.085;
  d[kHeadRz] = 0.10;
  d[kUpperArmLen] = 0.28;
  d[kUpperArmR] = 0.045;
  d[kForearmLen] = 0.26;
  d[kElbowR] = 0.038;
  d[kForearmR] = 0.042;
  d[kWristR] = 0.028;
  d[kHandLen] = 0.18;
  d[kHandHalfWidth] = 0.045;
  d[kHandHalfThick] = 0.016;
  d[kThighR] = 0.080;
  d[kThighMidR] = 0.068;
  d[kKneeR] = 0.050;
  d[kCalfR] = 0.056;
  d[kAnkleR] = 0.034;
  d[kFootLen] = 0.26;
  d[kHeelBack] = 0.05;
  d[kFootHalfWidth] = 0.045;
  d[kFootHalfHeight] = 0.03;
  return d;
}

// Parameter-space direction of each shape coefficient (meters per unit).
std::vector<Dims> shapeDirections(int count) {
  std::vector<Dims> dirs(8, Dims{});
  auto& stature = dirs[0];
  stature[kThighLen] = 0.02;
  stature[kCalfLen] = 0.02;
  stature[kTorsoLen] = 0.02;
  stature[kNeckLen] = 0.004;
  stature[kHeadLen] = 0.006;
  stature[kFootH] = 0.003;
  stature[kUpperArmLen] = 0.01;
  stature[kForearmLen] = 0.01;
  stature[kHandLen] = 0.005;
  stature[kFootLen] = 0.006;

  auto& girth = dirs[1];
  for (const int k : {kTorsoRxHip, kTorsoRxWaist, kTorsoRxChest, kTorsoRxShoulder}) {
    girth[k] = 0.01;
  }
  for (const int k : {kTorsoRzHip, kTorsoRzWaist, kTorsoRzChest, kTorsoRzShoulder}) {
    girth[k] = 0.008;
  }
  girth[kThighR] = 0.008;
  girth[kThighMidR] = 0.007;
  girth[kCalfR] = 0.004;
  girth[kUpperArmR] = 0.004;
  girth[kForearmR] = 0.003;
  girth[kNeckR] = 0.004;
  girth[kHipHalfWidth] = 0.005;

  auto& belly = dirs[2];
  belly[kTorsoRxWaist] = 0.01;
  belly[kTorsoRzWaist] = 0.015;
  belly[kTorsoRzHip] = 0.005;

  auto& arms = dirs[3];
  arms[kUpperArmLen] = 0.015;
  arms[kForearmLen] = 0.012;
  arms[kHandLen] = 0.006;

  auto& legs = dirs[4];
  legs[kThighLen] = 0.02;
  legs[kCalfLen] = 0.015;
  legs[kTorsoLen] = -0.025;

  auto& shoulders = dirs[5];
  shoulders[kShoulderHalfWidth] = 0.015;
  shoulders[kTorsoRxChest] = 0.01;
  shoulders[kTorsoRxShoulder] = 0.015;

  auto& limbs = dirs[6];
  limbs[kUpperArmR] = 0.005;
  limbs[kForearmR] = 0.004;
  limbs[kElbowR] = 0.003;
  limbs[kThighR] = 0.01;
  limbs[kThighMidR] = 0.009;
  limbs[kCalfR] = 0.007;
  limbs[kKneeR] = 0.004;

  auto& extremities = dirs[7];
  extremities[kHeadRx] = 0.006;
  extremities[kHeadRz] = 0.006;
  extremities[kFootLen] = 0.01;
  extremities[kFootHalfWidth] = 0.004;

  dirs.resize(count);
  return dirs;
}

// The female base is the male base moved along shared shape directions, so
// both genders describe overlapping measurement sets.
Dims femaleDims() {
  constexpr std::array<double, 7> kOffset = {-1.5, -0.6, -0.4, -0.3, 0.4, -1.2, -0.6};
  const auto dirs = shapeDirections(7);
  Dims d = maleDims();
  for (size_t b = 0; b < kOffset.size(); ++b) {
    for (int k = 0; k < kNumDims; ++k) {
      d[k] += kOffset[b] * dirs[b][k];
    }
  }
  return d;
}

enum Joint : int {
  kPelvis,
  kSpine,
  kNeck,
  kHead,
  kLShoulder,
  kLElbow,
  kLWrist,
  kRShoulder,
  kRElbow,
  kRWrist,
  kLHip,
  kLKnee,
  kLAnkle,
  kRHip,
  kRKnee,
  kRAnkle,
  kNumJoints,
};

int mirrorJoint(int j) {
  switch (j) {
    case kLShoulder:
      return kRShoulder;
    case kLElbow:
      return kRElbow;
    case kLWrist:
      return kRWrist;
    case kLHip:
      return kRHip;
    case kLKnee:
      return kRKnee;
    case kLAnkle:
      return kRAnkle;
    default:
      return j;
  }
}

// Rings whose centroid defines a joint or keypoint; filled while building.
struct RingRef {
  int first = 0;
  int n = 0;
};

struct HumanLayout {
  MeshBuilder mesh;
  LandmarkTable landmarks;
  std::array<RingRef, kNumJoints> jointRings{};
  RingRef leftHandTip, leftToe;
  int headTop = 0;
  int nose = 0;
};

HumanLayout buildHuman(const Dims& d) {
  HumanLayout L;
  MeshBuilder& b = L.mesh;
  const Vector3d ex = Vector3d::UnitX();
  const Vector3d ey = Vector3d::UnitY();
  const Vector3d ez = Vector3d::UnitZ();

  const double hipY = d[kFootH] + d[kCalfLen] + d[kThighLen];
  const double neckBaseY = hipY + d[kTorsoLen];
  const double headBaseY = neckBaseY + d[kNeckLen];
  const double shoulderY = neckBaseY - d[kShoulderDrop];

  // Torso: 16-gon rings, k=0 model-left, k=4 front, k=8 right, k=12 back.
  constexpr int nT = 16;
  const double torsoT[] = {0.0, 0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0};
  auto torsoRadius = [&](int i) {
    static constexpr int hip = 0, waist = 1, chest = 2, shoulder = 3;
    static const std::array<std::pair<int, int>, 8> mix = {
        {{hip, hip}, {hip, hip}, {hip, waist}, {waist, waist}, {waist, chest}, {chest, chest}, {chest, shoulder},
         {shoulder, shoulder}}};
    const int rxs[] = {kTorsoRxHip, kTorsoRxWaist, kTorsoRxChest, kTorsoRxShoulder};
    const int rzs[] = {kTorsoRzHip, kTorsoRzWaist, kTorsoRzChest, kTorsoRzShoulder};
    const auto [a, c] = mix[i];
    return std::make_pair(0.5 * (d[rxs[a]] + d[rxs[c]]), 0.5 * (d[rzs[a]] + d[rzs[c]]));
  };
  int torso[8];
  for (int i = 0; i < 8; ++i) {
    const auto [rx, rz] = torsoRadius(i);
    Weights w = torsoT[i] < 0.4 ? Weights{{kPelvis, 1.0}}
        : torsoT[i] == 0.4      ? Weights{{kPelvis, 0.4}, {kSpine, 0.6}}
                                : Weights{{kSpine, 1.0}};
    torso[i] = b.ring(Vector3d(0, hipY + torsoT[i] * d[kTorsoLen], 0), ex, ez, rx, rz, nT, w);
    if (i > 0) {
      b.bridge(torso[i - 1], torso[i], nT);
    }
  }
  L.jointRings[kPelvis] = {torso[1], nT};
  L.jointRings[kSpine] = {torso[3], nT};
  L.landmarks["pubic_bone"] = torso[0] + 4;
  L.landmarks["belly_button"] = torso[3] + 4;
  L.landmarks["back_belly_button"] = torso[3] + 12;
  L.landmarks["nipple"] = torso[5] + 4;

  constexpr int nN = 16;
  int neck[3];
  for (int i = 0; i < 3; ++i) {
    Weights w = i == 0 ? Weights{{kNeck, 0.7}, {kSpine, 0.3}} : Weights{{kNeck, 1.0}};
    neck[i] = b.ring(Vector3d(0, neckBaseY + 0.5 * i * d[kNeckLen], 0), ex, ez, d[kNeckR], d[kNeckR], nN, w);
    if (i > 0) {
      b.bridge(neck[i - 1], neck[i], nN);
    }
  }
  L.jointRings[kNeck] = {neck[0], nN};
  L.landmarks["cervicale"] = neck[0] + 12;
  L.landmarks["suprasternale"] = neck[0] + 4;
  L.landmarks["adams_apple"] = neck[1] + 4;

  constexpr int nH = 16;
  const double headT[] = {0.0, 0.15, 0.35, 0.55, 0.75, 0.9};
  const double headScale[] = {0.7, 0.9, 1.0, 1.0, 0.85, 0.55};
  int head[6];
  for (int i = 0; i < 6; ++i) {
    Weights w = i == 0 ? Weights{{kHead, 0.7}, {kNeck, 0.3}} : Weights{{kHead, 1.0}};
    head[i] = b.ring(
        Vector3d(0, headBaseY + headT[i] * d[kHeadLen], 0),
        ex,
        ez,
        headScale[i] * d[kHeadRx],
        headScale[i] * d[kHeadRz],
        nH,
        w);
    if (i > 0) {
      b.bridge(head[i - 1], head[i], nH);
    }
  }
  L.headTop = b.point(Vector3d(0, headBaseY + d[kHeadLen], 0), {{kHead, 1.0}});
  b.fan(head[5], L.headTop, nH);
  L.jointRings[kHead] = {head[0], nH};
  L.landmarks["head_top"] = L.headTop;
  L.landmarks["chin"] = head[1] + 4;
  L.landmarks["ear_center_l"] = head[2] + 0;
  L.landmarks["ear_center_r"] = head[2] + 8;
  L.landmarks["head_temple"] = head[3] + 4;
  L.nose = head[2] + 4;

  // Left limbs; the right side is appended as an exact mirror below.
  const int leftBegin = static_cast<int>(b.verts.size());

  // Arm along +x: k=0 top, k=3 front, k=6 bottom, k=9 back.
  constexpr int nA = 12;
  const double shX = d[kShoulderHalfWidth];
  const double elbowX = shX + d[kUpperArmLen];
  const double wristX = elbowX + d[kForearmLen];
  int upper[3], fore[3], hand[3];
  for (int i = 0; i < 3; ++i) {
    Weights w = i == 0 ? Weights{{kLShoulder, 0.7}, {kSpine, 0.3}} : Weights{{kLShoulder, 1.0}};
    upper[i] = b.ring(
        Vector3d(shX + 0.5 * i * d[kUpperArmLen], shoulderY, 0), ey, ez, d[kUpperArmR], d[kUpperArmR], nA, w);
    if (i > 0) {
      b.bridge(upper[i - 1], upper[i], nA);
    }
  }
  const double foreT[] = {0.0, 0.3, 1.0};
  const int foreR[] = {kElbowR, kForearmR, kWristR};
  for (int i = 0; i < 3; ++i) {
    Weights w = i == 0 ? Weights{{kLElbow, 0.7}, {kLShoulder, 0.3}} : Weights{{kLElbow, 1.0}};
    fore[i] = b.ring(
        Vector3d(elbowX + foreT[i] * d[kForearmLen], shoulderY, 0), ey, ez, d[foreR[i]], d[foreR[i]], nA, w);
    if (i > 0) {
      b.bridge(fore[i - 1], fore[i], nA);
    }
  }
  constexpr int nHand = 8;
  for (int i = 0; i < 3; ++i) {
    Weights w = i == 0 ? Weights{{kLWrist, 0.7}, {kLElbow, 0.3}} : Weights{{kLWrist, 1.0}};
    hand[i] = b.ring(
        Vector3d(wristX + 0.5 * i * d[kHandLen], shoulderY, 0),
        ey,
        ez,
        d[kHandHalfThick],
        d[kHandHalfWidth],
        nHand,
        w);
    if (i > 0) {
      b.bridge(hand[i - 1], hand[i], nHand);
    }
  }
  L.jointRings[kLShoulder] = {upper[0], nA};
  L.jointRings[kLElbow] = {upper[2], nA};
  L.jointRings[kLWrist] = {fore[2], nA};
  L.leftHandTip = {hand[2], nHand};
  L.landmarks["acromion_l"] = upper[0] + 0;
  L.landmarks["bicep_center_l"] = upper[1] + 0;
  L.landmarks["elbow_l"] = upper[2] + 0;
  L.landmarks["forearm_widest_l"] = fore[1] + 0;
  L.landmarks["wrist_l"] = fore[2] + 0;
  L.landmarks["stylion_l"] = fore[2] + 6;
  L.landmarks["finger_valley_l"] = hand[2] + 0;

  // Leg along -y: k=0 outer, k=3 front, k=6 inner, k=9 back.
  constexpr int nL = 12;
  const double hipX = d[kHipHalfWidth];
  const double kneeY = hipY - d[kThighLen];
  int thigh[3], calf[3], foot[4];
  const int thighR[] = {kThighR, kThighMidR, kKneeR};
  for (int i = 0; i < 3; ++i) {
    Weights w = i == 0 ? Weights{{kLHip, 0.7}, {kPelvis, 0.3}} : Weights{{kLHip, 1.0}};
    thigh[i] =
        b.ring(Vector3d(hipX, hipY - 0.5 * i * d[kThighLen], 0), ex, ez, d[thighR[i]], d[thighR[i]], nL, w);
    if (i > 0) {
      b.bridge(thigh[i - 1], thigh[i], nL);
    }
  }
  const double calfT[] = {0.0, 0.3, 1.0};
  const int calfR[] = {kKneeR, kCalfR, kAnkleR};
  for (int i = 0; i < 3; ++i) {
    Weights w = i == 0 ? Weights{{kLKnee, 0.7}, {kLHip, 0.3}} : Weights{{kLKnee, 1.0}};
    calf[i] =
        b.ring(Vector3d(hipX, kneeY - calfT[i] * d[kCalfLen], 0), ex, ez, d[calfR[i]], d[calfR[i]], nL, w);
    if (i > 0) {
      b.bridge(calf[i - 1], calf[i], nL);
    }
  }
  // Foot along +z: k=0 outer, k=2 top, k=4 inner, k=6 bottom.
  constexpr int nF = 8;
  const double footT[] = {0.0, 0.35, 0.7, 1.0};
  for (int i = 0; i < 4; ++i) {
    foot[i] = b.ring(
        Vector3d(hipX, d[kFootHalfHeight], footT[i] * d[kFootLen] - d[kHeelBack]),
        ex,
        ey,
        d[kFootHalfWidth],
        d[kFootHalfHeight],
        nF,
        {{kLAnkle, 1.0}});
    if (i > 0) {
      b.bridge(foot[i - 1], foot[i], nF);
    }
  }
  L.jointRings[kLHip] = {thigh[0], nL};
  L.jointRings[kLKnee] = {thigh[2], nL};
  L.jointRings[kLAnkle] = {calf[2], nL};
  L.leftToe = {foot[3], nF};
  L.landmarks["trochanterion_l"] = thigh[0] + 0;
  L.landmarks["thigh_center_l"] = thigh[1] + 3;
  L.landmarks["knee_cap_l"] = thigh[2] + 3;
  L.landmarks["calf_widest_l"] = calf[1] + 9;
  L.landmarks["ankle_l"] = calf[2] + 0;
  L.landmarks["heel_l"] = foot[0] + 6;
  L.landmarks["ball_l"] = foot[2] + 6;
  L.landmarks["big_toe_l"] = foot[3] + 4;
  L.landmarks["small_toe_l"] = foot[3] + 0;

  // Mirror the left limbs across x = 0.
  const int leftEnd = static_cast<int>(b.verts.size());
  const int offset = leftEnd - leftBegin;
  for (int v = leftBegin; v < leftEnd; ++v) {
    Vector3d p = b.verts[v];
    p.x() = -p.x();
    Weights w = b.weights[v];
    for (auto& jw : w) {
      jw.first = mirrorJoint(jw.first);
    }
    b.point(p, std::move(w));
  }
  const size_t numFaces = b.faces.size();
  for (size_t f = 0; f < numFaces; ++f) {
    const auto& face = b.faces[f];
    if (face[0] >= leftBegin && face[0] < leftEnd) {
      b.faces.push_back({face[0] + offset, face[2] + offset, face[1] + offset});
    }
  }
  for (const int j : {kLShoulder, kLElbow, kLWrist, kLHip, kLKnee, kLAnkle}) {
    L.jointRings[mirrorJoint(j)] = {L.jointRings[j].first + offset, L.jointRings[j].n};
  }
  LandmarkTable mirrored;
  for (const auto& [name, index] : L.landmarks) {
    if (name.ends_with("_l") && index >= leftBegin) {
      mirrored[name.substr(0, name.size() - 2) + "_r"] = index + offset;
    }
  }
  L.landmarks.merge(mirrored);
  return L;
}

Pointsd verticesOf(const MeshBuilder& b) {
  Pointsd v(static_cast<Eigen::Index>(b.verts.size()), 3);
  for (size_t i = 0; i < b.verts.size(); ++i) {
    v.row(static_cast<Eigen::Index>(i)) = b.verts[i].transpose();
  }
  return v;
}

void addPoseCorrectives(BodyModel& m) {
  const int V = m.numVertices();
  const int J = m.numJoints();
  const auto dominant = m.dominantJoints();
  Eigen::MatrixXd pd = Eigen::MatrixXd::Zero(3 * V, 9 * (J - 1));
  for (int v = 0; v < V; ++v) {
    const int j = dominant[v];
    if (j == 0) {
      continue;
    }
    for (int c = 0; c < 3; ++c) {
      for (int e = 0; e < 9; ++e) {
        pd(3 * v + c, 9 * (j - 1) + e) = 0.002 * std::sin(7.0 * v + 3.0 * c + e + j);
      }
    }
  }
  m.pose_dirs = std::move(pd);
}

} // namespace

BodyModel cylinder() {
  constexpr int n = 16;
  constexpr double radius = 0.1;
  MeshBuilder b;
  const int r0 = b.ring(Vector3d::Zero(), Vector3d::UnitX(), Vector3d::UnitZ(), radius, radius, n, {{0, 1.0}});
  const int r1 = b.ring(Vector3d::UnitY(), Vector3d::UnitX(), Vector3d::UnitZ(), radius, radius, n, {{1, 1.0}});
  b.bridge(r0, r1, n);
  const int bottom = b.point(Vector3d::Zero(), {{0, 1.0}});
  const int top = b.point(Vector3d::UnitY(), {{1, 1.0}});
  for (int k = 0; k < n; ++k) {
    b.faces.push_back({r0 + (k + 1) % n, r0 + k, bottom});
  }
  b.fan(r1, top, n);

  BodyModel m = finish(b, 2);
  const int V = m.numVertices();
  m.gender = Gender::kNeutral;
  m.beta_dim = 2;
  m.parents = {-1, 0};
  m.joint_names = {"base", "middle"};
  m.shape_dirs = Eigen::MatrixXd::Zero(3 * V, 2);
  for (int v = 0; v < V; ++v) {
    const Vector3d p = m.v_template.row(v).transpose();
    const Vector3d radial(p.x(), 0.0, p.z());
    if (radial.norm() > 0.0) {
      m.shape_dirs.block<3, 1>(3 * v, 0) = radial.normalized();
    }
    m.shape_dirs(3 * v + 1, 1) = p.y();
  }
  m.joint_regressor = Eigen::MatrixXd::Zero(2, V);
  m.joint_regressor(0, bottom) = 1.0;
  m.joint_regressor(1, bottom) = 0.5;
  m.joint_regressor(1, top) = 0.5;
  m.landmarks = {{"bottom", bottom}, {"top", top}, {"rim_low", r0}, {"rim_high", r1}, {"rim_low_opposite", r0 + n / 2}};
  KeypointRegressor ends;
  ends.matrix = Eigen::MatrixXd::Zero(2, V);
  ends.matrix(0, bottom) = 1.0;
  ends.matrix(1, top) = 1.0;
  ends.names = {"bottom", "top"};
  m.keypoint_regressors["kpr_ends"] = ends;

  MeasurementSpec waist;
  waist.index = 1;
  waist.name = "waist_circumference";
  waist.kind = MeasurementKind::kCircumference;
  waist.plane_position = {"rim_low", "rim_high"};
  waist.submesh.joints = {0, 1};
  MeasurementSpec height;
  height.index = 2;
  height.name = "height";
  height.kind = MeasurementKind::kLengthVertical;
  height.from = {"top"};
  height.to = {"bottom"};
  MeasurementSpec width;
  width.index = 3;
  width.name = "rim_width";
  width.kind = MeasurementKind::kLengthEuclidean;
  width.from = {"rim_low"};
  width.to = {"rim_low_opposite"};
  m.measurements = {waist, height, width};
  m.validate();
  return m;
}

BodyModel arm() {
  constexpr int n = 8;
  constexpr double radius = 0.1;
  MeshBuilder b;
  int rings[5];
  for (int i = 0; i < 5; ++i) {
    const double x = 0.5 * i;
    Weights w = x < 1.0 ? Weights{{0, 1.0}} : x == 1.0 ? Weights{{0, 0.5}, {1, 0.5}} : Weights{{1, 1.0}};
    rings[i] = b.ring(Vector3d(x, 0, 0), Vector3d::UnitY(), Vector3d::UnitZ(), radius, radius, n, w);
    if (i > 0) {
      b.bridge(rings[i - 1], rings[i], n);
    }
  }
  BodyModel m = finish(b, 2);
  const int V = m.numVertices();
  m.gender = Gender::kNeutral;
  m.beta_dim = 1;
  m.parents = {-1, 0};
  m.joint_names = {"shoulder", "elbow"};
  m.shape_dirs = Eigen::MatrixXd::Zero(3 * V, 1);
  for (int v = 0; v < V; ++v) {
    const Vector3d p = m.v_template.row(v).transpose();
    m.shape_dirs.block<3, 1>(3 * v, 0) = Vector3d(0, p.y(), p.z()).normalized();
  }
  m.joint_regressor.resize(2, V);
  m.joint_regressor.row(0) = centroidRow(V, rings[0], n);
  m.joint_regressor.row(1) = centroidRow(V, rings[2], n);
  KeypointRegressor tips;
  tips.matrix.resize(3, V);
  tips.matrix.row(0) = centroidRow(V, rings[0], n);
  tips.matrix.row(1) = centroidRow(V, rings[2], n);
  tips.matrix.row(2) = centroidRow(V, rings[4], n);
  tips.names = {"shoulder", "elbow", "tip"};
  m.keypoint_regressors["kpr_arm"] = tips;
  m.validate();
  return m;
}

BodyModel human(const HumanOptions& options) {
  Dims base;
  int betaDim = 8;
  switch (options.gender) {
    case Gender::kMale:
      base = maleDims();
      break;
    case Gender::kFemale:
      base = femaleDims();
      betaDim = 7;
      break;
    case Gender::kNeutral: {
      const Dims m = maleDims();
      const Dims f = femaleDims();
      for (int k = 0; k < kNumDims; ++k) {
        base[k] = 0.5 * (m[k] + f[k]);
      }
      break;
    }
  }

  HumanLayout layout = buildHuman(base);
  BodyModel m = finish(layout.mesh, kNumJoints);
  const int V = m.numVertices();
  m.gender = options.gender;
  m.beta_dim = betaDim;
  m.parents = {-1, kPelvis, kSpine, kNeck, kSpine, kLShoulder, kLElbow, kSpine, kRShoulder, kRElbow,
               kPelvis, kLHip, kLKnee, kPelvis, kRHip, kRKnee};
  m.joint_names = {
      "pelvis",
      "spine",
      "neck",
      "head",
      "left_shoulder",
      "left_elbow",
      "left_wrist",
      "right_shoulder",
      "right_elbow",
      "right_wrist",
      "left_hip",
      "left_knee",
      "left_ankle",
      "right_hip",
      "right_knee",
      "right_ankle"};
  m.landmarks = layout.landmarks;

  // Shape blendshapes are exact differences of the linear builder.
  const auto dirs = shapeDirections(betaDim);
  m.shape_dirs.resize(3 * V, betaDim);
  for (int b = 0; b < betaDim; ++b) {
    Dims moved = base;
    for (int k = 0; k < kNumDims; ++k) {
      moved[k] += dirs[b][k];
    }
    const Pointsd delta = verticesOf(buildHuman(moved).mesh) - m.v_template;
    for (int v = 0; v < V; ++v) {
      m.shape_dirs.block<3, 1>(3 * v, b) = delta.row(v).transpose();
    }
  }

  m.joint_regressor.resize(kNumJoints, V);
  for (int j = 0; j < kNumJoints; ++j) {
    m.joint_regressor.row(j) = centroidRow(V, layout.jointRings[j].first, layout.jointRings[j].n);
  }

  const int mirrorOffset = layout.landmarks.at("acromion_r") - layout.landmarks.at("acromion_l");
  KeypointRegressor body;
  body.matrix = Eigen::MatrixXd::Zero(kNumJoints + 6, V);
  body.matrix.topRows(kNumJoints) = m.joint_regressor;
  body.matrix(kNumJoints + 0, layout.headTop) = 1.0;
  body.matrix(kNumJoints + 1, layout.nose) = 1.0;
  body.matrix.row(kNumJoints + 2) = centroidRow(V, layout.leftHandTip.first, layout.leftHandTip.n);
  body.matrix.row(kNumJoints + 3) = centroidRow(V, layout.leftHandTip.first + mirrorOffset, layout.leftHandTip.n);
  body.matrix.row(kNumJoints + 4) = centroidRow(V, layout.leftToe.first, layout.leftToe.n);
  body.matrix.row(kNumJoints + 5) = centroidRow(V, layout.leftToe.first + mirrorOffset, layout.leftToe.n);
  body.names = m.joint_names;
  for (const char* name : {"head_top", "nose", "left_hand", "right_hand", "left_toe", "right_toe"}) {
    body.names.emplace_back(name);
  }
  m.keypoint_regressors["kpr_body"] = body;

  BodyPartJoints parts;
  parts.torso_lower = {kPelvis, kSpine};
  parts.torso_upper = {kPelvis, kSpine};
  parts.head = {kHead};
  parts.neck = {kNeck};
  parts.upper_arm_l = {kLShoulder};
  parts.upper_arm_r = {kRShoulder};
  parts.forearm_l = {kLElbow};
  parts.forearm_r = {kRElbow};
  parts.thigh_l = {kLHip};
  parts.thigh_r = {kRHip};
  parts.calf_l = {kLKnee};
  parts.calf_r = {kRKnee};
  m.measurements = standardMeasurementSpecs(parts);

  if (options.pose_correctives) {
    addPoseCorrectives(m);
  }
  m.validate();
  return m;
}

Eigen::MatrixXd shapeCorpus(int betaDim, int count, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd corpus(count, betaDim);
  for (int i = 0; i < count; ++i) {
    for (int b = 0; b < betaDim; ++b) {
      corpus(i, b) = rng.normal(0.0, 1.0 / (1.0 + 0.25 * b));
    }
  }
  return corpus;
}

} // namespace anthrofit::toy
