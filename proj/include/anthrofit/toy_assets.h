#pragma once

#include "anthrofit/body_model.h"

#include <cstdint>

namespace anthrofit::toy {

/// Vertical cylinder of radius 0.1 m and height 1 m: two 16-gon rings plus
/// two cap centers (V=34), two joints, two shape coefficients. Coefficient 0
/// moves every ring vertex radially by 1 m per unit; coefficient 1 stretches
/// the cylinder axially. Measurements: waist circumference at mid-height,
/// height, rim width.
BodyModel cylinder();

/// Horizontal two-joint arm along +x: joint 0 at the origin, joint 1 at
/// (1,0,0). Vertices past x=1 follow joint 1 rigidly; the ring at x=1 is
/// blended. One radial shape coefficient.
BodyModel arm();

struct HumanOptions {
  Gender gender = Gender::kMale;
  bool pose_correctives = false;
};

/// Bilaterally symmetric tube-built body with 16 joints, the 44 standard
/// landmarks and the 36 standard measurements. Shape coefficients control
/// stature, girth, belly, arm length, leg/torso ratio, shoulder breadth,
/// limb girth and head/foot size (female drops the last one).
BodyModel human(const HumanOptions& options = {});

/// Synthetic shape corpus: `count` rows of independent normals with a fixed
/// per-dimension spread.
Eigen::MatrixXd shapeCorpus(int betaDim, int count, uint64_t seed);

} // namespace anthrofit::toy
