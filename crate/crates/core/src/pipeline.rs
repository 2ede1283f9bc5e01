//! Glue from a synthetic scene to per-group assets: occupancy, grouping,
//! mapping tables, pyramids and baked feature images.

use crate::error::{Error, Result};
use crate::feature::{bake, DensityActivation, FeatureImage};
use crate::mapping::{build_mapping_with, square_image_for, Layout, MappingTable};
use crate::occupancy::{build_pyramid, plan_groups, threshold_occupancy, FrameGroup, GroupPlan, OccupancyGrid, OccupancyPyramid};
use crate::scene::SyntheticScene;

/// Shared assets of one group.
#[derive(Debug, Clone)]
pub struct GroupAssets {
    pub group: FrameGroup,
    pub map: MappingTable,
    pub pyramid: OccupancyPyramid,
}

/// Thresholded occupancy of every frame.
pub fn frame_occupancy(scene: &SyntheticScene, gamma: f64) -> Result<Vec<OccupancyGrid>> {
    (0..scene.frame_count)
        .map(|t| Ok(threshold_occupancy(&scene.generate_frame(t)?.0, gamma)))
        .collect()
}

pub fn plan_scene(scene: &SyntheticScene, gamma: f64, theta: usize) -> Result<GroupPlan> {
    plan_groups(&frame_occupancy(scene, gamma)?, theta)
}

/// Image size fitting the largest group union.
pub fn image_size_for(plan: &GroupPlan) -> (usize, usize) {
    square_image_for(plan.groups.iter().map(|g| g.union.count()).max().unwrap_or(0))
}

/// Mapping table and pyramid for every group of `plan`.
pub fn build_groups(plan: &GroupPlan, width: usize, height: usize, layout: Layout) -> Result<Vec<GroupAssets>> {
    plan.groups
        .iter()
        .map(|g| {
            Ok(GroupAssets {
                group: g.clone(),
                map: build_mapping_with(&g.union, width, height, layout)?,
                pyramid: build_pyramid(&g.union)?,
            })
        })
        .collect()
}

/// Ground-truth feature images of every frame, baked through its group's
/// mapping table.
pub fn bake_sequence(
    scene: &SyntheticScene,
    groups: &[GroupAssets],
    act: &DensityActivation,
    gamma: f64,
) -> Result<Vec<FeatureImage>> {
    let mut out = Vec::with_capacity(scene.frame_count);
    for (gi, g) in groups.iter().enumerate() {
        for t in g.group.start..=g.group.end {
            if t != out.len() {
                return Err(Error::Config(format!("groups skip frame {}", out.len())));
            }
            let (d, f) = scene.generate_frame(t)?;
            out.push(bake(&d, &f, &g.map, act, gamma, t, gi)?);
        }
    }
    if out.len() != scene.frame_count {
        return Err(Error::Config(format!(
            "groups cover {} of {} frames",
            out.len(),
            scene.frame_count
        )));
    }
    Ok(out)
}
