pub mod canny_ref;
pub mod images;
