from app.domain.model.shape import arc_length_params
from app.domain.service.shape_repr.basis import basis_eval, basis_matrix, surface_design, surface_frame
from app.domain.service.shape_repr.fitter import (ShapeFitter, fit_error, reconstruct_curve, reconstruct_points,
                                                  reconstruct_surface)
from app.domain.service.shape_repr.lsm import fit_curve_lsm, fit_surface_lsm
from app.domain.service.shape_repr.mls import (fit_curve_mls, fit_surface_mls, mls_weight, pca_compress, pca_expand,
                                               solve_curve_nodes, solve_surface_nodes)
from app.domain.service.shape_repr.sampling import fps_downsample, min_pairwise_distance
