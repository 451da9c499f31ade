#include "divrank/export.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>

#include "divrank/error.hpp"

namespace divrank {

Projection2D pca_2d(const Matrix& rows) {
    require(rows.rows() >= 1 && rows.cols() >= 2, "pca_2d: need at least one row and two columns");
    const auto n = static_cast<Eigen::Index>(rows.rows()), d = static_cast<Eigen::Index>(rows.cols());
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(rows.data(), n, d);
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(std::max<Eigen::Index>(1, n - 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw DivergenceError("pca_2d: eigen decomposition failed");

    // Eigenvalues come in ascending order.
    Eigen::MatrixXd basis(d, 2);
    const double total = std::max(eig.eigenvalues().sum(), 1e-300);
    Projection2D out;
    for (int c = 0; c < 2; ++c) {
        Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - c);
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        basis.col(c) = v;
        out.explained.push_back(eig.eigenvalues()(d - 1 - c) / total);
    }
    const Eigen::MatrixXd proj = centered * basis;
    out.coords = Matrix(rows.rows(), 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int c = 0; c < 2; ++c) out.coords(static_cast<std::size_t>(i), static_cast<std::size_t>(c)) = proj(i, c);
    return out;
}

void export_projection_csv(std::ostream& out, const EmbeddingCorpus& corpus, const ReEncoderModel& reencoder,
                           const std::vector<std::string>& preamble) {
    struct RowInfo {
        const char* kind;
        QueryId query;
        ImageId image;
        int category;
        bool relevant;
    };
    std::vector<RowInfo> info;
    std::vector<Vec> raw;
    std::vector<bool> is_image;
    for (const auto& q : corpus.queries) {
        info.push_back({"query", q.query_id, -1, kIrrelevant, false});
        raw.push_back(q.feature);
        is_image.push_back(false);
        for (ImageId id : q.candidate_ids) {
            const auto& im = corpus.image(id);
            info.push_back({"image", q.query_id, id, im.category, im.relevant});
            raw.push_back(im.feature);
            is_image.push_back(true);
        }
    }
    require(!raw.empty(), "export: corpus has no queries");
    const Matrix raw_m = Matrix::from_rows(raw);
    // Queries are not re-encoded; only image features pass through g.
    Matrix enc_m = reencode_batch(raw_m, reencoder);
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (!is_image[i]) std::copy(raw[i].begin(), raw[i].end(), enc_m.row(i).begin());

    for (const auto& line : preamble) out << "# " << line << '\n';
    out << "space,kind,query_id,image_id,category,relevant,x,y\n";
    char buf[256];
    for (const auto& [space, m] : {std::pair<const char*, const Matrix*>{"raw", &raw_m}, {"reencoded", &enc_m}}) {
        const Projection2D p = pca_2d(*m);
        for (std::size_t i = 0; i < info.size(); ++i) {
            const auto& r = info[i];
            std::snprintf(buf, sizeof buf, "%s,%s,%lld,%lld,%d,%d,%.9g,%.9g\n", space, r.kind,
                          static_cast<long long>(r.query), static_cast<long long>(r.image), r.category,
                          r.relevant ? 1 : 0, p.coords(i, 0), p.coords(i, 1));
            out << buf;
        }
    }
}

}  // namespace divrank
