#pragma once

#include "cevkmv/mc_oracle.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace fixtures {

// Asset-level group specs at the sample medians: assets = equity + default
// point, leverage = D / assets, local vol = sigma_E * E / assets.
inline std::vector<cevkmv::PanelSpec> two_group_specs(double beta_st = 0.98, double beta_nst = 1.14) {
    cevkmv::PanelSpec st;
    st.group = cevkmv::Group::ST;
    st.beta = beta_st;
    st.asset_median = 3.67;
    st.local_vol_median = 0.33;
    st.leverage_median = 0.31;
    st.leverage_log_sd = 0.8;
    cevkmv::PanelSpec nst = st;
    nst.group = cevkmv::Group::NonST;
    nst.beta = beta_nst;
    nst.asset_median = 12.6;
    nst.local_vol_median = 0.27;
    nst.leverage_median = 0.35;
    return {st, nst};
}

// Same entries, volatilities replaced by the equivalent-vol expansion at the
// planted beta with delta_i fixed from the firm's first quarter.
inline cevkmv::AssetPanel expansion_panel(cevkmv::AssetPanel p, double beta) {
    std::map<std::string, double> delta;
    for (auto& e : p.entries) {
        if (!delta.count(e.firm_id)) delta[e.firm_id] = e.asset_vol * std::pow(e.asset_value, 1.0 - beta);
        e.asset_vol = cevkmv::hagan_woodward_vol(e.asset_value, e.default_point, e.rate, e.horizon,
                                                 {delta[e.firm_id], beta});
    }
    return p;
}

}  // namespace fixtures
