#pragma once

#include <cstddef>
#include <vector>

namespace mvcl::oracle {

// Reference implementations written as direct transcriptions of the
// definitions: nested loops in long double, no shared code with the
// production paths.

using Matrix = std::vector<std::vector<double>>;

double CrossEntropy(const Matrix& logits, const std::vector<int>& labels);
double InfoNce(const Matrix& z_a, const Matrix& z_b, double tau);
/// Rows i and i + N are the positive pair.
double SimClr(const Matrix& z, double tau);
double SupCon(const Matrix& z, const std::vector<int>& labels, double tau);
double Sincere(const Matrix& z, const std::vector<int>& labels, double tau);
double EpsSupInfoNce(const Matrix& z, const std::vector<int>& labels, double tau, double eps);

/// Exhaustive k-NN: repeated arg-max selection of the k most similar rows.
std::vector<int> Knn(const Matrix& corpus, const std::vector<int>& labels, const Matrix& queries,
                     int k);
/// Selection-sort ranking, ties to the lower corpus index.
std::vector<std::size_t> Ranking(const Matrix& corpus, const std::vector<double>& query);
/// AP from precision@r recomputed from scratch at every relevant rank.
double AveragePrecision(const std::vector<bool>& relevant, int k);

}  // namespace mvcl::oracle
