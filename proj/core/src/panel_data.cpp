#include "transnet/panel_data.hpp"

#include <algorithm>

namespace transnet {

Matrix PanelDataset::dest_share(std::size_t t) const {
  const Matrix& x = dest_exports.at(t);
  Matrix chi(x.rows(), x.cols());
  for (std::size_t k = 0; k < x.rows(); ++k) {
    const double total = sizes.seller_size(t, k);
    if (!(total > 0.0)) continue;
    for (std::size_t c = 0; c < x.cols(); ++c) chi(k, c) = std::min(1.0, x(k, c) / total);
  }
  return chi;
}

void PanelDataset::validate() const {
  const std::size_t T = n_years(), ns = n_sellers(), nb = n_buyers(), nc = destinations.size();
  if (sizes.seller_size.rows() != T || sizes.seller_size.cols() != ns || sizes.buyer_size.rows() != T ||
      sizes.buyer_size.cols() != nb)
    throw SizeError("panel: size matrices do not match the graph");
  if (proximity.size() != ns || proximity.proximity.rows() != ns)
    throw SizeError("panel: proximity does not match the seller registry");
  if (dest_exports.size() != T) throw SizeError("panel: one destination-export matrix per year required");
  for (const Matrix& x : dest_exports)
    if (x.rows() != ns || x.cols() != nc) throw SizeError("panel: destination exports have the wrong shape");
  if (fx.rows() != T || fx.cols() != nc) throw SizeError("panel: exchange rates have the wrong shape");
  for (double v : fx.flat())
    if (!(v > 0.0)) throw InputError("panel: exchange rates must be positive");
  if (!seller_locations.empty() && seller_locations.size() != ns)
    throw SizeError("panel: seller locations do not match the registry");
}

}  // namespace transnet
