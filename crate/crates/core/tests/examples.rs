// Every example under examples/ must keep running against the current API.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }

        #[test]
        fn $name() {
            $name::run_example().expect(concat!(stringify!($name), " failed"));
        }
    };
}

example!(weighted_reservoir);
example!(ppswr_estimate);
example!(segment_drilldown);
example!(label_error_correction);
example!(mde_planning);
example!(simlab_figure);
example!(daily_pipeline);
example!(score_version_check);
