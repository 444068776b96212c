#include "kfl/linalg.hpp"

#include "kfl/errors.hpp"

#include <algorithm>

namespace kfl {

double spectral_norm(const Mat& m)
{
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues()(0);
}

double spectral_radius(const Mat& m)
{
    if (m.rows() != m.cols()) throw DimensionError("spectral_radius needs a square matrix");
    if (m.size() == 0) return 0.0;
    Eigen::EigenSolver<Mat> es(m, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Mat symmetrize(const Mat& m)
{
    return 0.5 * (m + m.transpose());
}

double lambda_min(const Mat& symmetric)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetric, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double lambda_max(const Mat& symmetric)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetric, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(symmetric.rows() - 1);
}

void require_psd(const Mat& m, const std::string& name, double tol)
{
    if (m.rows() != m.cols() || m.rows() == 0)
        throw CovarianceError(name + " must be a non-empty square matrix");
    if (m != m.transpose()) throw CovarianceError(name + " is not symmetric");
    if (lambda_min(m) < -tol) throw CovarianceError(name + " has a negative eigenvalue");
}

Mat psd_factor(const Mat& p)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(p));
    Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal();
}

}  // namespace kfl
