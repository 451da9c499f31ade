#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "divrank/corpus.hpp"
#include "divrank/matrix.hpp"
#include "divrank/reencoder.hpp"

namespace divrank {

struct Projection2D {
    Matrix coords;  // n×2
    Vec explained;  // variance share of the two components
};

/// Principal-component projection of the centered rows onto the top two
/// components. Component signs are fixed so the largest-magnitude loading
/// is positive.
Projection2D pca_2d(const Matrix& rows);

/// CSV rows `space,kind,query_id,image_id,category,relevant,x,y` for the
/// queries and candidates of `corpus`, once for raw features and once for
/// re-encoded ones (each space gets its own projection).
void export_projection_csv(std::ostream& out, const EmbeddingCorpus& corpus, const ReEncoderModel& reencoder,
                           const std::vector<std::string>& preamble = {});

}  // namespace divrank
