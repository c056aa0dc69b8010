#pragma once

#include <optional>
#include <string>

#include "coopgot/answer.h"
#include "coopgot/curation.h"
#include "coopgot/scene.h"

namespace coopgot {

// Ego-frame bird's-eye view of one sample: agent boxes, the reference
// trajectory, the ground-truth answer and (when given) a model answer.
std::string render_sample_svg(const Scene& scene, const QaPair& qa, const std::optional<Answer>& model,
                              const std::string& title = "");

}  // namespace coopgot
