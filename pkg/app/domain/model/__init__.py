"""Value types of the servo domain: shapes, plants, jacobians, control commands and run configs."""
